"""Independent Python implementations of the benchmark workloads.

They read their inputs from the assembled image (the ``.data`` constants),
so the expected outputs never depend on the emulator.
"""

from __future__ import annotations

from typing import Sequence

from app.vm.assembler import ProgramImage

MASK32 = 0xFFFF_FFFF
INF = 0x7FFF_FFFF

HASH_ROUNDS = 64
HASH_K = 0x9E3779B1
HASH_IV = (0x6A09E667, 0xBB67AE85, 0x3C6EF372, 0xA54FF53A)

QSORT_N = 64
DIJKSTRA_N = 16


def read_words(image: ProgramImage, symbol: str, count: int) -> list[int]:
    addr = image.symbol(symbol) - image.data_base
    raw = image.data[addr:addr + 4 * count]
    return [int.from_bytes(raw[i:i + 4], "little") for i in range(0, len(raw), 4)]


def words_to_bytes(words: Sequence[int]) -> bytes:
    return b"".join((w & MASK32).to_bytes(4, "little") for w in words)


def _signed(w: int) -> int:
    return w - (1 << 32) if w & 0x8000_0000 else w


def _rotl(x: int, n: int) -> int:
    return ((x << n) | (x >> (32 - n))) & MASK32


def sort_words(words: Sequence[int]) -> list[int]:
    return sorted(words, key=_signed)


def shortest_paths(matrix: Sequence[int], n: int = DIJKSTRA_N, source: int = 0) -> list[int]:
    dist = [INF] * n
    dist[source] = 0
    done = [False] * n
    for _ in range(n):
        candidates = [i for i in range(n) if not done[i] and dist[i] < INF]
        if not candidates:
            break
        u = min(candidates, key=lambda i: (dist[i], i))
        done[u] = True
        for v in range(n):
            w = matrix[u * n + v]
            if w and not done[v] and dist[u] + w < dist[v]:
                dist[v] = dist[u] + w
    return dist


def mix_digest(message: Sequence[int], iv: Sequence[int] = HASH_IV) -> list[int]:
    a, b, c, d = iv
    for r in range(HASH_ROUNDS):
        m = message[r]
        a = (_rotl(a ^ m, 5) * HASH_K) & MASK32
        b = (_rotl(b ^ a, 13) + c) & MASK32
        c = ((c ^ b) * HASH_K) & MASK32
        d = _rotl((d + c) & MASK32, 5) ^ a
        a, b, c, d = d, a, b, c
    return [a, b, c, d]


def reference_output(name: str, image: ProgramImage) -> bytes:
    if name == "qsort":
        return words_to_bytes(sort_words(read_words(image, "qs_input", QSORT_N)))
    if name == "dijkstra":
        matrix = read_words(image, "dj_matrix", DIJKSTRA_N * DIJKSTRA_N)
        return words_to_bytes(shortest_paths(matrix))
    if name == "hash":
        return words_to_bytes(mix_digest(read_words(image, "hs_message", HASH_ROUNDS)))
    raise KeyError(name)
