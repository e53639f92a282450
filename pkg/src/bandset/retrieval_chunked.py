"""Partitioned retrieval: first-level hash to chunks, one flat structure per
chunk, concatenated bit-planes plus an offsets/seeds directory.

Chunks are built independently (optionally on a thread pool) and merged in
chunk order, so the output is a pure function of the key/value set and the
base seed. The in-memory directory packs each chunk's retry seed into the
top 16 bits of its 48-bit table offset, letting a query resolve offset,
seed, and table span with two directory reads; the on-disk format keeps
seeds and offsets as separate arrays.
"""

from __future__ import annotations

import math
import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

from .bitkit import BitVec, Block, _dot_raw, xor_window
from .retrieval_flat import (
    FlatParams,
    FlatRetrieval,
    RetriesExhausted,
    construct_flat,
    normalize_pairs,
)
from .row_gen import _STREAM_CHUNK, HashSeed, _hash128_raw, _row_raw, chunk_for_key

__all__ = [
    "ChunkedParams",
    "ChunkDirectory",
    "ChunkedRetrieval",
    "FormatError",
    "construct_chunked",
    "query_chunked",
    "serialize",
    "deserialize",
    "overhead",
]

MAGIC = b"BSET"
VERSION = 1
FLAG_FORCE_LEADING_ONE = 1
_HEADER = struct.Struct("<4sHHHHdQQQQ")
HEADER_BYTES = _HEADER.size  # 52

_OFFSET_BITS = 48
_OFFSET_MASK = (1 << _OFFSET_BITS) - 1


class FormatError(Exception):
    """Serialized input is not a valid structure."""


@dataclass(slots=True)
class ChunkedParams:
    epsilon: float
    L: int = 64
    r: int = 1
    C: int = 10_000
    max_retries: int = 64
    base_seed: int = 0
    force_leading_one: bool = False

    def __post_init__(self) -> None:
        if not 0.0 < self.epsilon < 1.0:
            raise ValueError("epsilon must be in (0, 1)")
        if self.L < 1 or self.r < 1 or self.C < 1:
            raise ValueError("L, r, C must all be >= 1")
        if self.L >= (1 << 16) or self.r >= (1 << 16):
            raise ValueError("L and r must fit in 16 bits")
        if not 1 <= self.max_retries <= (1 << 16):
            raise ValueError("max_retries must be in [1, 65536]")

    def flat_params(self) -> FlatParams:
        return FlatParams(
            epsilon=self.epsilon,
            L=self.L,
            r=self.r,
            max_retries=self.max_retries,
            base_seed=self.base_seed,
            force_leading_one=self.force_leading_one,
        )


@dataclass(slots=True)
class ChunkDirectory:
    """Per-chunk table offsets (bit positions, prefix sums with a terminal
    entry) and retry seeds, stored packed: entry k is offset | seed << 48."""

    num_chunks: int
    packed: list[int]

    @classmethod
    def from_parts(cls, offsets: list[int], seeds: list[int]) -> "ChunkDirectory":
        num_chunks = len(seeds)
        if len(offsets) != num_chunks + 1:
            raise ValueError("need one more offset than seeds")
        if offsets[-1] > _OFFSET_MASK:
            raise ValueError("table too large for 48-bit offsets")
        packed = [offsets[k] | (seeds[k] << _OFFSET_BITS) for k in range(num_chunks)]
        packed.append(offsets[num_chunks])
        return cls(num_chunks, packed)

    @property
    def offsets(self) -> list[int]:
        return [p & _OFFSET_MASK for p in self.packed]

    @property
    def seeds(self) -> list[int]:
        return [self.packed[k] >> _OFFSET_BITS for k in range(self.num_chunks)]


@dataclass(slots=True)
class ChunkedRetrieval:
    params: ChunkedParams
    directory: ChunkDirectory
    tables: list[BitVec]  # r planes, each the concatenation over chunks
    m: int

    @property
    def plane_bits(self) -> int:
        return self.tables[0].length


def num_chunks_for(m: int, C: int) -> int:
    return max(1, math.ceil(m / C))


def construct_chunked(pairs, params: ChunkedParams, threads: int = 1) -> ChunkedRetrieval:
    """Partition, build each chunk as a flat structure, concatenate.

    RetriesExhausted is re-raised with the failing chunk index attached.
    """
    mapping = normalize_pairs(pairs, params.r)
    m = len(mapping)
    num_chunks = num_chunks_for(m, params.C)
    buckets: list[list[tuple[bytes, int]]] = [[] for _ in range(num_chunks)]
    part_seed = HashSeed(params.base_seed, 0)
    for key, value in mapping.items():
        buckets[chunk_for_key(key, part_seed, num_chunks)].append((key, value))

    fp = params.flat_params()

    def build(k: int) -> FlatRetrieval:
        try:
            return construct_flat(buckets[k], fp)
        except RetriesExhausted as exc:
            raise RetriesExhausted(exc.retries, chunk=k) from None

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            flats = list(pool.map(build, range(num_chunks)))
    else:
        flats = [build(k) for k in range(num_chunks)]

    offsets = [0]
    for flat in flats:
        offsets.append(offsets[-1] + flat.table_bits)
    seeds = [flat.seed.retry for flat in flats]
    directory = ChunkDirectory.from_parts(offsets, seeds)

    total_bits = offsets[-1]
    planes = [BitVec(total_bits) for _ in range(params.r)]
    for k, flat in enumerate(flats):
        for t in range(params.r):
            chunk_bits = flat.table[t].to_int()
            xor_window(planes[t], offsets[k], Block(chunk_bits, flat.table_bits))
    return ChunkedRetrieval(params, directory, planes, m)


def query_chunked(ds: ChunkedRetrieval, key: bytes) -> int:
    """Two directory reads, then one windowed dot product per plane."""
    params = ds.params
    L = params.L
    base_seed = params.base_seed
    num_chunks = ds.directory.num_chunks
    chunk = ((_hash128_raw(key, base_seed, 0, _STREAM_CHUNK) >> 64) * num_chunks) >> 64
    packed = ds.directory.packed
    p0 = packed[chunk]
    p1 = packed[chunk + 1]
    offset = p0 & _OFFSET_MASK
    retry = p0 >> _OFFSET_BITS
    n_chunk = (p1 & _OFFSET_MASK) - offset - (L - 1)
    start, bits = _row_raw(key, base_seed, retry, n_chunk, L, params.force_leading_one)
    bit_offset = offset + start - 1
    value = 0
    for t, plane in enumerate(ds.tables):
        value |= _dot_raw(plane, bit_offset, bits, L) << t
    return value


def serialize(ds: ChunkedRetrieval) -> bytes:
    p = ds.params
    flags = FLAG_FORCE_LEADING_ONE if p.force_leading_one else 0
    out = [
        _HEADER.pack(
            MAGIC, VERSION, flags, p.r, p.L, p.epsilon, p.C, ds.m,
            ds.directory.num_chunks, p.base_seed,
        )
    ]
    num_chunks = ds.directory.num_chunks
    out.append(struct.pack(f"<{num_chunks}H", *ds.directory.seeds))
    out.append(struct.pack(f"<{num_chunks + 1}Q", *ds.directory.offsets))
    plane_bits = ds.plane_bits
    nbytes = ((plane_bits + 63) // 64) * 8
    for plane in ds.tables:
        out.append(plane.to_int().to_bytes(nbytes, "little"))
    return b"".join(out)


def deserialize(data: bytes) -> ChunkedRetrieval:
    if len(data) < HEADER_BYTES:
        raise FormatError("truncated header")
    magic, version, flags, r, L, epsilon, C, m, num_chunks, base_seed = _HEADER.unpack(
        data[:HEADER_BYTES]
    )
    if magic != MAGIC:
        raise FormatError("bad magic")
    if version != VERSION:
        raise FormatError(f"unsupported version {version}")
    if flags & ~FLAG_FORCE_LEADING_ONE:
        raise FormatError("unknown flag bits set")
    try:
        params = ChunkedParams(
            epsilon=epsilon, L=L, r=r, C=C, base_seed=base_seed,
            force_leading_one=bool(flags & FLAG_FORCE_LEADING_ONE),
        )
    except ValueError as exc:
        raise FormatError(str(exc)) from None
    if num_chunks != num_chunks_for(m, C):
        raise FormatError("chunk count inconsistent with m and C")

    pos = HEADER_BYTES
    seeds_bytes = num_chunks * 2
    offsets_bytes = (num_chunks + 1) * 8
    if len(data) < pos + seeds_bytes + offsets_bytes:
        raise FormatError("truncated directory")
    seeds = list(struct.unpack_from(f"<{num_chunks}H", data, pos))
    pos += seeds_bytes
    offsets = list(struct.unpack_from(f"<{num_chunks + 1}Q", data, pos))
    pos += offsets_bytes
    if offsets[0] != 0:
        raise FormatError("first offset must be zero")
    for a, b in zip(offsets, offsets[1:]):
        if b - a < L:
            raise FormatError("chunk table shorter than one block")
    if offsets[-1] > _OFFSET_MASK:
        raise FormatError("table too large for 48-bit offsets")

    plane_bits = offsets[-1]
    nbytes = ((plane_bits + 63) // 64) * 8
    if len(data) != pos + r * nbytes:
        raise FormatError("plane payload length mismatch")
    planes = []
    for t in range(r):
        value = int.from_bytes(data[pos : pos + nbytes], "little")
        try:
            planes.append(BitVec.from_int(value, plane_bits))
        except ValueError:
            raise FormatError("nonzero padding bits in plane") from None
        pos += nbytes
    directory = ChunkDirectory.from_parts(offsets, seeds)
    return ChunkedRetrieval(params, directory, planes, m)


def overhead(ds: ChunkedRetrieval | FlatRetrieval) -> float:
    """Stored bits per key-bit beyond the information minimum, N/(m r) - 1.

    Counts solution planes plus (for chunked structures) the offsets and
    seeds directory; the fixed-size header is excluded.
    """
    if ds.m == 0:
        raise ValueError("overhead undefined for empty structure")
    if isinstance(ds, FlatRetrieval):
        bits = ds.params.r * ds.table_bits
        return bits / (ds.m * ds.params.r) - 1.0
    num_chunks = ds.directory.num_chunks
    bits = ds.params.r * ds.plane_bits + 64 * (num_chunks + 1) + 16 * num_chunks
    return bits / (ds.m * ds.params.r) - 1.0
