"""Bundled benchmark programs.

Each source under ``asm/`` follows the same instrumentation skeleton: an
init section, ``__task_start`` with ``PMUON``, the task body and its OUTs,
``PMUOFF`` plus counter staging, then ``__final_bp`` right before ``HALT``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path

from app.benchmarks.reference import reference_output
from app.errors import UnknownBenchmark
from app.vm.assembler import ProgramImage, assemble

logger = logging.getLogger("softerr.benchmarks")

ASM_DIR = Path(__file__).resolve().parent / "asm"

BENCHMARKS: dict[str, str] = {
    "qsort": "memory-intense: recursive quicksort of 64 words",
    "dijkstra": "compute-intense: shortest paths on a 16-node graph",
    "hash": "compute-intense: 64-round rotate-xor-multiply digest",
}


@dataclass(frozen=True)
class BenchmarkSpec:
    name: str
    image: ProgramImage
    expected_output: bytes
    source_path: Path

    @property
    def task_start(self) -> int:
        return self.image.symbol("__task_start")

    @property
    def final_bp(self) -> int:
        return self.image.symbol("__final_bp")

    @property
    def task_window(self) -> tuple[int, int]:
        return self.task_start, self.final_bp


def list_benchmarks() -> list[str]:
    return list(BENCHMARKS)


def source_path(name: str) -> Path:
    if name not in BENCHMARKS:
        raise UnknownBenchmark(f"unknown benchmark {name!r}; choose from {list_benchmarks()}")
    return ASM_DIR / f"{name}.s"


@lru_cache(maxsize=None)
def build_benchmark(name: str) -> BenchmarkSpec:
    path = source_path(name)
    image = assemble(path.read_text(encoding="utf-8"))
    image.symbol("__task_start")
    image.symbol("__final_bp")
    spec = BenchmarkSpec(
        name=name,
        image=image,
        expected_output=reference_output(name, image),
        source_path=path,
    )
    logger.debug("built %s: %d code words, final bp at 0x%x", name, len(image.code), spec.final_bp)
    return spec
