"""Exception hierarchy for the fault-injection lab.

Machine traps are never exceptions: they come back as ``StopReason`` values.
Everything here is a host-side failure (bad input, misuse of the debug port,
broken golden run, unreadable campaign directory).
"""

from __future__ import annotations

from typing import Optional


class LabError(Exception):
    """Root of every error raised by the lab."""

    exit_code: int = 1


# ── Assembler ────────────────────────────────────────────────────────────────

class AssemblyError(LabError):
    def __init__(self, message: str, line: Optional[int] = None) -> None:
        self.line = line
        prefix = f"line {line}: " if line is not None else ""
        super().__init__(f"{prefix}{message}")


class UnknownMnemonic(AssemblyError):
    pass


class UndefinedLabel(AssemblyError):
    pass


class DuplicateLabel(AssemblyError):
    pass


class ImmediateOutOfRange(AssemblyError):
    pass


class MalformedOperand(AssemblyError):
    pass


# ── Loader ───────────────────────────────────────────────────────────────────

class ImageTooLarge(LabError):
    pass


# ── Debug port ───────────────────────────────────────────────────────────────

class DebugPortError(LabError):
    pass


class NotHalted(DebugPortError):
    pass


class BadIndex(DebugPortError):
    pass


class BadAddress(DebugPortError):
    pass


class OutOfBounds(DebugPortError):
    pass


class InvalidTarget(DebugPortError):
    pass


# ── PMU ──────────────────────────────────────────────────────────────────────

class PmuError(LabError):
    pass


class SlotOutOfRange(PmuError):
    pass


class BankEnabled(PmuError):
    pass


class SlotUnconfigured(PmuError):
    pass


# ── Benchmarks / campaign ────────────────────────────────────────────────────

class UnknownBenchmark(LabError):
    pass


class CampaignError(LabError):
    pass


class GoldenFailure(CampaignError):
    """The fault-free run cannot serve as a reference; the campaign is aborted."""
    exit_code = 2


class GoldenTrapped(GoldenFailure):
    pass


class GoldenTimeout(GoldenFailure):
    pass


class GoldenMismatch(GoldenFailure):
    """The fault-free run disagrees with the benchmark's reference output."""


class GoldenUnstable(GoldenFailure):
    """Golden repetitions disagree, or their merged events break an identity."""


class EmptyTrace(CampaignError):
    pass


# ── Analysis ─────────────────────────────────────────────────────────────────

class AnalysisError(LabError):
    pass


class TooFewRows(AnalysisError):
    pass


class DegenerateCovariance(AnalysisError):
    pass


class EmptyInput(AnalysisError):
    pass


# ── Storage ──────────────────────────────────────────────────────────────────

class StorageError(LabError):
    exit_code = 3


class MissingRecords(StorageError):
    pass


class CorruptRecords(StorageError):
    pass
