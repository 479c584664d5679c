"""Direct-mapped, write-allocate L1 data cache (tags only, no data, no write-back)."""

from __future__ import annotations

from enum import Enum

from app.models.schemas import EventKind

_L1D_HIT = EventKind.L1D_HIT.value
_L1D_MISS = EventKind.L1D_MISS.value
_MEM_READ = EventKind.MEM_READ.value
_MEM_WRITE = EventKind.MEM_WRITE.value


class AccessKind(str, Enum):
    READ = "read"
    WRITE = "write"


class CacheModel:
    def __init__(self, num_lines: int = 256, line_size: int = 16) -> None:
        if num_lines & (num_lines - 1) or line_size & (line_size - 1):
            raise ValueError("cache geometry must use powers of two")
        self.num_lines = num_lines
        self.line_size = line_size
        self._tags: list[int] = [-1] * num_lines  # -1 = invalid line

    def index(self, addr: int) -> int:
        return (addr // self.line_size) % self.num_lines

    def tag(self, addr: int) -> int:
        return addr // (self.line_size * self.num_lines)

    def would_hit(self, addr: int) -> bool:
        """Would ``addr`` hit? Leaves the cache untouched."""
        return self._tags[self.index(addr)] == self.tag(addr)

    def lookup(self, addr: int) -> bool:
        """Hit/miss for ``addr``; a miss installs the line."""
        if self.would_hit(addr):
            return True
        self._tags[self.index(addr)] = self.tag(addr)
        return False

    def access(self, addr: int, kind: AccessKind, events: list[int]) -> bool:
        """Look up ``addr`` and tally the hit/miss and read/write events."""
        hit = self.lookup(addr)
        events[_L1D_HIT if hit else _L1D_MISS] += 1
        events[_MEM_WRITE if kind is AccessKind.WRITE else _MEM_READ] += 1
        return hit
