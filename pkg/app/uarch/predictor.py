"""Bimodal branch predictor: a table of 2-bit saturating counters indexed by pc."""

from __future__ import annotations

from typing import NamedTuple, Optional

from app.models.schemas import EventKind

STRONG_NOT_TAKEN, WEAK_NOT_TAKEN, WEAK_TAKEN, STRONG_TAKEN = range(4)

_BR_EXEC = EventKind.BR_EXEC.value
_BR_TAKEN = EventKind.BR_TAKEN.value
_BR_MISPRED = EventKind.BR_MISPRED.value


class BranchResult(NamedTuple):
    predicted: bool
    mispredicted: bool


def bimodal_update(state: int, taken: bool) -> int:
    if taken:
        return min(state + 1, STRONG_TAKEN)
    return max(state - 1, STRONG_NOT_TAKEN)


class BranchPredictor:
    def __init__(self, entries: int = 64) -> None:
        self.entries = entries
        self.table: list[int] = [WEAK_NOT_TAKEN] * entries

    def index(self, pc: int) -> int:
        return (pc >> 2) % self.entries

    def predict(self, pc: int) -> bool:
        return self.table[self.index(pc)] >= WEAK_TAKEN

    def predict_and_resolve(
        self, pc: int, taken: bool, events: Optional[list[int]] = None
    ) -> BranchResult:
        """Predict the branch at ``pc``, train the counter on the real outcome."""
        predicted = self.predict(pc)
        idx = self.index(pc)
        self.table[idx] = bimodal_update(self.table[idx], taken)
        mispredicted = predicted != taken
        if events is not None:
            events[_BR_EXEC] += 1
            if taken:
                events[_BR_TAKEN] += 1
            if mispredicted:
                events[_BR_MISPRED] += 1
        return BranchResult(predicted, mispredicted)
