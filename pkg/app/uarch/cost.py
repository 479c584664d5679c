"""Cycle cost model.

Every instruction costs one base cycle. A data-cache access adds
``DCACHE_HIT_CYCLES`` or ``DCACHE_MISS_CYCLES``; a mispredicted conditional
branch adds ``MISPREDICT_CYCLES``. Instruction fetch is free.
"""

from __future__ import annotations

from typing import Optional

BASE_CYCLES = 1
DCACHE_HIT_CYCLES = 1
DCACHE_MISS_CYCLES = 10
MISPREDICT_CYCLES = 2

# No instruction both touches memory and branches.
MAX_INSTRUCTION_COST = BASE_CYCLES + max(DCACHE_MISS_CYCLES, MISPREDICT_CYCLES)


def instruction_cost(
    op: int,
    dcache_hit: Optional[bool] = None,
    mispredicted: Optional[bool] = None,
) -> int:
    """Cycles spent by one instruction.

    ``dcache_hit`` is None when the instruction does not touch data memory,
    ``mispredicted`` is None when it is not a conditional branch. ``op`` does
    not change the cost in this model.
    """
    cycles = BASE_CYCLES
    if dcache_hit is not None:
        cycles += DCACHE_HIT_CYCLES if dcache_hit else DCACHE_MISS_CYCLES
    if mispredicted:
        cycles += MISPREDICT_CYCLES
    return cycles
