"""Shingling and MinHash signatures over DNA sequences.

A sequence is cut into overlapping windows of ``k`` symbols (shingles); the
resulting set is compressed into ``num_perm`` minimum hash values.  Each
"permutation" is an affine map ``(a*x + b) mod (2**61 - 1)`` applied to a
64-bit base hash of the shingle, with the per-permutation parameters drawn
deterministically from a counter-based PRNG keyed by ``seed``.  Two
signatures built with the same ``(num_perm, seed)`` estimate the Jaccard
similarity of the underlying shingle sets as the fraction of equal
positions.

Binary signature layout (all integers little-endian)::

    bytes 0-3    magic b"BDSG"
    byte  4      format version (1)
    bytes 5-12   seed, u64
    bytes 13-16  num_perm, u32
    bytes 17-18  user id length in bytes, u16
    ...          user id, UTF-8
    ...          num_perm values, u64 each

The JSON debug form mirrors the same fields as a plain object.
"""

from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .encoding import DnaSequence
from .errors import EmptySet, FormatError, IncompatibleSignatures, SequenceTooShort

MERSENNE_61 = np.uint64((1 << 61) - 1)
_MASK32 = np.uint64(0xFFFFFFFF)
_MASK29 = np.uint64((1 << 29) - 1)
_MASK64 = (1 << 64) - 1

SIGNATURE_MAGIC = b"BDSG"
SIGNATURE_VERSION = 1

# Domain tags keeping the hash-family draw and the band-digest draw (lsh
# module) independent even under the same user seed.
_TAG_HASH_FAMILY = 1
_TAG_BAND_DIGEST = 2


def rng_for(seed: int, tag: int) -> np.random.Generator:
    """Counter-based generator for (seed, purpose) pairs, stable across runs."""
    key = (int(seed) & _MASK64) | (tag << 64)
    return np.random.Generator(np.random.Philox(key=key))


def fold_m61(x: np.ndarray) -> np.ndarray:
    """Reduce u64 values modulo 2**61 - 1."""
    x = (x >> np.uint64(61)) + (x & MERSENNE_61)
    return np.where(x >= MERSENNE_61, x - MERSENNE_61, x)


def mulmod_m61(a: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Exact (a * x) mod (2**61 - 1) for operands already below 2**61.

    Splits both operands into 32-bit limbs so every intermediate stays
    inside u64; 2**64 = 8 and 2**61 = 1 modulo the prime.
    """
    a_hi = a >> np.uint64(32)
    a_lo = a & _MASK32
    x_hi = x >> np.uint64(32)
    x_lo = x & _MASK32
    hi = a_hi * x_hi  # < 2**58
    mid = a_hi * x_lo + a_lo * x_hi  # < 2**62
    lo = fold_m61(a_lo * x_lo)
    mid = (mid >> np.uint64(29)) + ((mid & _MASK29) << np.uint64(32))
    return fold_m61((hi << np.uint64(3)) + mid + lo)


@lru_cache(maxsize=1 << 20)
def shingle_hash(shingle: str) -> int:
    """Stable 64-bit base hash of a shingle, identical across runs/platforms."""
    return int.from_bytes(hashlib.blake2b(shingle.encode("utf-8"), digest_size=8).digest(), "little")


@lru_cache(maxsize=64)
def _hash_family(seed: int, num_perm: int) -> tuple[np.ndarray, np.ndarray]:
    rng = rng_for(seed, _TAG_HASH_FAMILY)
    a = rng.integers(1, int(MERSENNE_61), size=num_perm, dtype=np.uint64)
    b = rng.integers(0, int(MERSENNE_61), size=num_perm, dtype=np.uint64)
    return a, b


@dataclass(frozen=True)
class ShingleSet:
    """The distinct k-symbol windows of one user's sequence."""

    user_id: str
    k: int
    shingles: frozenset[str]


class MinHashSignature:
    """Fixed-length sketch of a shingle set.

    Comparable only against signatures produced with the same ``num_perm``
    and ``seed``.
    """

    __slots__ = ("user_id", "num_perm", "seed", "values")

    def __init__(self, user_id: str, num_perm: int, seed: int, values: np.ndarray):
        self.user_id = user_id
        self.num_perm = num_perm
        self.seed = seed
        self.values = values

    def __eq__(self, other) -> bool:
        if not isinstance(other, MinHashSignature):
            return NotImplemented
        return (
            self.user_id == other.user_id
            and self.num_perm == other.num_perm
            and self.seed == other.seed
            and np.array_equal(self.values, other.values)
        )

    def __repr__(self) -> str:
        return f"MinHashSignature(user_id={self.user_id!r}, num_perm={self.num_perm}, seed={self.seed})"

    def to_bytes(self) -> bytes:
        uid = self.user_id.encode("utf-8")
        header = struct.pack("<4sBQIH", SIGNATURE_MAGIC, SIGNATURE_VERSION, self.seed, self.num_perm, len(uid))
        return header + uid + self.values.astype("<u8").tobytes()

    @classmethod
    def from_bytes(cls, data: bytes) -> "MinHashSignature":
        header_size = struct.calcsize("<4sBQIH")
        if len(data) < header_size:
            raise FormatError("signature blob truncated")
        magic, version, seed, num_perm, uid_len = struct.unpack_from("<4sBQIH", data)
        if magic != SIGNATURE_MAGIC:
            raise FormatError(f"bad signature magic {magic!r}")
        if version != SIGNATURE_VERSION:
            raise FormatError(f"unsupported signature version {version}")
        expected = header_size + uid_len + 8 * num_perm
        if len(data) != expected:
            raise FormatError(f"signature blob has {len(data)} bytes, expected {expected}")
        uid = data[header_size : header_size + uid_len].decode("utf-8")
        values = np.frombuffer(data, dtype="<u8", count=num_perm, offset=header_size + uid_len)
        return cls(uid, num_perm, seed, values.astype(np.uint64))

    def to_debug_json(self) -> str:
        doc = {
            "format": "minhash-signature",
            "version": SIGNATURE_VERSION,
            "seed": self.seed,
            "num_perm": self.num_perm,
            "user_id": self.user_id,
            "values": [int(v) for v in self.values],
        }
        return json.dumps(doc, sort_keys=True)

    @classmethod
    def from_debug_json(cls, text: str) -> "MinHashSignature":
        doc = json.loads(text)
        if doc.get("format") != "minhash-signature":
            raise FormatError("not a minhash-signature document")
        if doc.get("version") != SIGNATURE_VERSION:
            raise FormatError(f"unsupported signature version {doc.get('version')}")
        values = np.array(doc["values"], dtype=np.uint64)
        return cls(doc["user_id"], doc["num_perm"], doc["seed"], values)


def shingle(seq: DnaSequence, k: int) -> ShingleSet:
    """All length-k windows of the sequence, as a set.

    Windows are taken over the flat symbol string, so with several
    alphabets a window can straddle post boundaries.
    """
    if k < 1:
        raise ValueError(f"k must be positive, got {k}")
    symbols = seq.symbols
    if len(symbols) < k:
        raise SequenceTooShort(
            f"user {seq.user_id!r}: sequence length {len(symbols)} < k={k}"
        )
    windows = frozenset(symbols[i : i + k] for i in range(len(symbols) - k + 1))
    return ShingleSet(seq.user_id, k, windows)


def minhash(shingles: ShingleSet, num_perm: int, seed: int) -> MinHashSignature:
    """MinHash signature of a shingle set under the seeded hash family."""
    if num_perm < 1:
        raise ValueError(f"num_perm must be positive, got {num_perm}")
    if not shingles.shingles:
        raise EmptySet(f"user {shingles.user_id!r} has an empty shingle set")
    a, b = _hash_family(seed, num_perm)
    xs = np.fromiter(
        (shingle_hash(s) for s in shingles.shingles), dtype=np.uint64, count=len(shingles.shingles)
    )
    xs = fold_m61(xs)
    hashed = fold_m61(mulmod_m61(a[:, None], xs[None, :]) + b[:, None])
    return MinHashSignature(shingles.user_id, num_perm, seed, hashed.min(axis=1))


def check_compatible(a: MinHashSignature, b: MinHashSignature) -> None:
    if a.num_perm != b.num_perm or a.seed != b.seed:
        raise IncompatibleSignatures(
            f"(num_perm={a.num_perm}, seed={a.seed}) vs (num_perm={b.num_perm}, seed={b.seed})"
        )


def estimate_jaccard(a: MinHashSignature, b: MinHashSignature) -> float:
    """Fraction of equal signature positions; estimates set Jaccard."""
    check_compatible(a, b)
    return float(np.count_nonzero(a.values == b.values)) / a.num_perm
