"""Performance monitoring unit.

The machine keeps free-running totals of every catalog event from reset.
A counter slot accumulates the growth of its event's total while the bank
is enabled, which is exactly "increment only while enabled" without paying
for a per-event dispatch in the interpreter loop.
"""

from __future__ import annotations

import logging
from typing import Iterable, Iterator, Mapping, Optional, Protocol, runtime_checkable

from app.errors import BankEnabled, SlotOutOfRange, SlotUnconfigured
from app.models.schemas import CATALOG, EventKind, parse_event

logger = logging.getLogger("softerr.pmu")

DEFAULT_HPC_SLOTS = 6


class EventVector(Mapping[EventKind, int]):
    """Event counts of one run, keyed by :class:`EventKind` in catalog order."""

    def __init__(self, counts: Optional[Mapping] = None) -> None:
        self._counts: dict[EventKind, int] = {}
        for key, value in (counts or {}).items():
            self._counts[parse_event(key)] = int(value)

    def __getitem__(self, key: EventKind) -> int:
        return self._counts[parse_event(key)]

    def __iter__(self) -> Iterator[EventKind]:
        return (e for e in CATALOG if e in self._counts)

    def __len__(self) -> int:
        return len(self._counts)

    def __repr__(self) -> str:
        return f"EventVector({self.to_dict()})"

    @classmethod
    def from_totals(cls, totals: list[int]) -> "EventVector":
        return cls({e: totals[e] for e in CATALOG})

    @property
    def complete(self) -> bool:
        return len(self._counts) == len(CATALOG)

    def merge(self, other: Mapping[EventKind, int]) -> "EventVector":
        merged = dict(self._counts)
        merged.update({parse_event(k): v for k, v in other.items()})
        return EventVector(merged)

    def to_dict(self) -> dict[str, int]:
        return {e.name: self._counts[e] for e in self}

    def check_identities(self) -> list[str]:
        """Names of the violated event identities; empty for a healthy run."""
        c = self._counts
        failed = []

        def have(*keys: EventKind) -> bool:
            return all(k in c for k in keys)

        E = EventKind
        if have(E.L1D_HIT, E.L1D_MISS, E.MEM_READ, E.MEM_WRITE):
            if c[E.L1D_HIT] + c[E.L1D_MISS] != c[E.MEM_READ] + c[E.MEM_WRITE]:
                failed.append("L1D_HIT + L1D_MISS == MEM_READ + MEM_WRITE")
        if have(E.BR_TAKEN, E.BR_EXEC) and c[E.BR_TAKEN] > c[E.BR_EXEC]:
            failed.append("BR_TAKEN <= BR_EXEC")
        if have(E.BR_MISPRED, E.BR_EXEC) and c[E.BR_MISPRED] > c[E.BR_EXEC]:
            failed.append("BR_MISPRED <= BR_EXEC")
        if have(E.INSTR_RETIRED, E.CYCLES) and c[E.INSTR_RETIRED] > c[E.CYCLES]:
            failed.append("INSTR_RETIRED <= CYCLES")
        if E.TRAPS in c and c[E.TRAPS] not in (0, 1):
            failed.append("TRAPS in {0, 1}")
        return failed


@runtime_checkable
class EventObserver(Protocol):
    """Anything the machine can feed: bound to the event totals, gated by PMUON/PMUOFF."""

    def attach(self, totals: list[int]) -> None: ...

    def enable(self) -> None: ...

    def disable(self) -> None: ...

    def snapshot(self) -> "EventVector": ...


class PmuBank:
    """H counter slots, each selecting one catalog event."""

    def __init__(self, num_slots: int = DEFAULT_HPC_SLOTS) -> None:
        if num_slots < 1:
            raise SlotOutOfRange("a PMU bank needs at least one slot")
        self.num_slots = num_slots
        self.enabled = False
        self._selected: list[Optional[EventKind]] = [None] * num_slots
        self._accum: list[int] = [0] * num_slots
        self._base: list[int] = [0] * num_slots
        self._totals: list[int] = [0] * len(CATALOG)

    def attach(self, totals: list[int]) -> None:
        """Bind the bank to a machine's free-running event totals."""
        self._totals = totals

    # ── Host-side configuration ──────────────────────────────────────────

    def configure(self, slot: int, event: EventKind) -> None:
        self._check_slot(slot)
        if self.enabled:
            raise BankEnabled("cannot reprogram a counter while the bank is enabled")
        self._selected[slot] = parse_event(event)
        self._accum[slot] = 0

    def configure_all(self, events: Iterable[EventKind]) -> None:
        events = list(events)
        if len(events) > self.num_slots:
            raise SlotOutOfRange(f"{len(events)} events do not fit {self.num_slots} slots")
        for slot in range(self.num_slots):
            if slot < len(events):
                self.configure(slot, events[slot])
            else:
                self.clear(slot)

    def clear(self, slot: int) -> None:
        self._check_slot(slot)
        if self.enabled:
            raise BankEnabled("cannot reprogram a counter while the bank is enabled")
        self._selected[slot] = None
        self._accum[slot] = 0

    def selected(self, slot: int) -> Optional[EventKind]:
        self._check_slot(slot)
        return self._selected[slot]

    @property
    def assignment(self) -> list[Optional[EventKind]]:
        return list(self._selected)

    # ── Target-side control ──────────────────────────────────────────────

    def enable(self) -> None:
        if self.enabled:
            return
        for slot, event in enumerate(self._selected):
            if event is not None:
                self._base[slot] = self._totals[event]
        self.enabled = True

    def disable(self) -> None:
        if not self.enabled:
            return
        for slot, event in enumerate(self._selected):
            if event is not None:
                self._accum[slot] += self._totals[event] - self._base[slot]
        self.enabled = False

    # ── Readout ──────────────────────────────────────────────────────────

    def read(self, slot: int) -> int:
        self._check_slot(slot)
        event = self._selected[slot]
        if event is None:
            raise SlotUnconfigured(f"counter slot {slot} has no event selected")
        count = self._accum[slot]
        if self.enabled:
            count += self._totals[event] - self._base[slot]
        return count

    def read_raw(self, slot: int) -> int:
        """Register-level read used by PMURD: unconfigured or absent slots read 0."""
        if not 0 <= slot < self.num_slots or self._selected[slot] is None:
            return 0
        return self.read(slot)

    def snapshot(self) -> EventVector:
        """Counts of every configured slot."""
        return EventVector(
            {e: self.read(s) for s, e in enumerate(self._selected) if e is not None}
        )

    def _check_slot(self, slot: int) -> None:
        if not 0 <= slot < self.num_slots:
            raise SlotOutOfRange(f"slot {slot} outside 0..{self.num_slots - 1}")


class OracleObserver(PmuBank):
    """A bank with one slot per catalog event: the unlimited-counter reference."""

    def __init__(self) -> None:
        super().__init__(num_slots=len(CATALOG))
        self.configure_all(CATALOG)
