"""Unpartitioned retrieval structure: one band system over the whole key set.

Construction hashes every key to a row, solves the resulting system, and
keeps only the solution bit-planes plus the winning seed. A query is one
row hash and one windowed dot product per value bit. Keys outside the
constructed set return arbitrary bits by design.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .band_solver import BandRow, BandSystem, solve
from .bitkit import BitVec, _dot_raw
from .row_gen import HashSeed, RowParams, _row_raw, row_for_key


class ConstructError(Exception):
    """Construction could not produce a valid structure."""


class DuplicateKey(ConstructError):
    def __init__(self, key: bytes):
        super().__init__(f"duplicate key with conflicting values: {key!r}")
        self.key = key


class RetriesExhausted(ConstructError):
    def __init__(self, retries: int, chunk: int | None = None):
        where = f" in chunk {chunk}" if chunk is not None else ""
        super().__init__(f"construction failed after {retries} retries{where}")
        self.retries = retries
        self.chunk = chunk


@dataclass(slots=True)
class FlatParams:
    epsilon: float
    L: int = 64
    r: int = 1
    max_retries: int = 64
    base_seed: int = 0
    force_leading_one: bool = False

    def __post_init__(self) -> None:
        if not 0.0 < self.epsilon < 1.0:
            raise ValueError("epsilon must be in (0, 1)")
        if self.L < 1 or self.r < 1:
            raise ValueError("L and r must be >= 1")
        if not 1 <= self.max_retries <= (1 << 16):
            raise ValueError("max_retries must be in [1, 65536]")


@dataclass(slots=True)
class FlatRetrieval:
    """Solved table plus the seed needed to re-derive rows at query time."""

    params: FlatParams
    n: int
    seed: HashSeed
    table: list[BitVec]
    m: int = 0

    @property
    def table_bits(self) -> int:
        return self.n + self.params.L - 1


def normalize_pairs(pairs, r: int) -> dict[bytes, int]:
    """Dedup (key, value) pairs; equal keys must agree on the value."""
    out: dict[bytes, int] = {}
    limit = 1 << r
    for key, value in pairs:
        if not isinstance(key, (bytes, bytearray)):
            raise TypeError("keys must be byte strings")
        key = bytes(key)
        if not 0 <= value < limit:
            raise ValueError(f"value {value} does not fit in {r} bits")
        old = out.get(key)
        if old is None:
            out[key] = value
        elif old != value:
            raise DuplicateKey(key)
    return out


def positions_for(m: int, epsilon: float) -> int:
    """Start-position count: ceil(m / (1 - eps)), floored at 1 so the empty
    structure still has a valid L-bit table."""
    if m == 0:
        return 1
    return math.ceil(m / (1.0 - epsilon))


def _build_rows(
    items: list[tuple[bytes, int]],
    seed: HashSeed,
    rp: RowParams,
    force_leading_one: bool,
) -> list[BandRow]:
    rows = []
    for key, value in items:
        start, pattern = row_for_key(key, seed, rp, force_leading_one)
        rows.append((start, pattern.bits, key, BandRow(start, pattern, value)))
    # Canonical order: input permutations must not change the solved table.
    rows.sort(key=lambda t: t[:3])
    return [t[3] for t in rows]


def construct_flat(pairs, params: FlatParams) -> FlatRetrieval:
    """Retry seeds until the band system solves; record the winning retry.

    Raises RetriesExhausted when every retry produced a dependent system,
    DuplicateKey on contradictory input.
    """
    mapping = normalize_pairs(pairs, params.r)
    m = len(mapping)
    n = positions_for(m, params.epsilon)
    if m == 0:
        planes = [BitVec(n + params.L - 1) for _ in range(params.r)]
        return FlatRetrieval(params, n, HashSeed(params.base_seed, 0), planes, 0)

    items = list(mapping.items())
    rp = RowParams(n, params.L)
    for retry in range(params.max_retries):
        seed = HashSeed(params.base_seed, retry)
        rows = _build_rows(items, seed, rp, params.force_leading_one)
        table = solve(BandSystem(n, params.L, params.r, rows))
        if table is not None:
            table.seed_hint = seed
            return FlatRetrieval(params, n, seed, table.z, m)
    raise RetriesExhausted(params.max_retries)


def query_flat(ds: FlatRetrieval, key: bytes) -> int:
    """r-bit value for the key; arbitrary (but crash-free) outside the set."""
    L = ds.params.L
    start, bits = _row_raw(
        key, ds.seed.base_seed, ds.seed.retry, ds.n, L, ds.params.force_leading_one
    )
    offset = start - 1
    value = 0
    for t, plane in enumerate(ds.table):
        value |= _dot_raw(plane, offset, bits, L) << t
    return value
