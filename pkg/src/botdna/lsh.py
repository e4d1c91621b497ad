"""Banded LSH index over labeled MinHash signatures.

Signatures are split into ``bands`` groups of ``rows`` consecutive values;
each group is digested to a 64-bit key and filed into that band's bucket
table.  Two users become candidate neighbors when any band digest matches,
which happens with probability ``1 - (1 - s**rows)**bands`` for true
similarity ``s``.  ``lsh_plan`` picks the factorization whose curve best
matches a target similarity threshold.

Index file layout (all integers little-endian)::

    bytes 0-3   magic b"BDIX"
    byte  4     format version (1)
    bytes 5-12  plan threshold, f64
    bytes 13-16 bands, u32
    bytes 17-20 rows, u32
    bytes 21-24 num_perm, u32
    bytes 25-32 seed, u64
    bytes 33-40 user count, u64
    per user, in insertion order:
        u16 id length, UTF-8 id, u8 label (0 human / 1 bot),
        num_perm signature values (u64 each),
        bands band digests (u64 each)

Loading replays the stored users in order, so a round-tripped index
reproduces the original's query results exactly.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from functools import lru_cache
from typing import NamedTuple

import numpy as np
from scipy.integrate import quad

from .encoding import BOT, HUMAN
from .errors import DuplicateUser, FormatError, IncompatibleSignatures
from .minhash import (
    _TAG_BAND_DIGEST,
    MinHashSignature,
    fold_m61,
    mulmod_m61,
    rng_for,
)

INDEX_MAGIC = b"BDIX"
INDEX_VERSION = 1

_HEADER = struct.Struct("<4sBdIIIQQ")
_LABEL_CODE = {HUMAN: 0, BOT: 1}
_LABEL_NAME = {0: HUMAN, 1: BOT}


@dataclass(frozen=True)
class BandingPlan:
    """How a signature of ``bands * rows`` values is split for bucketing."""

    threshold: float
    bands: int
    rows: int


def _collision_probability(s: float, bands: int, rows: int) -> float:
    return 1.0 - (1.0 - s**rows) ** bands


def lsh_plan(threshold: float, num_perm: int) -> BandingPlan:
    """Pick the (bands, rows) factorization of num_perm for a threshold.

    Minimizes the equal-weight false-positive area below the threshold plus
    false-negative area above it under the collision curve
    ``1 - (1 - s**rows)**bands``; ties resolve to fewer rows.
    """
    if not 0.0 < threshold <= 1.0:
        raise ValueError(f"threshold must be in (0, 1], got {threshold}")
    if num_perm < 2:
        raise ValueError(f"num_perm must be at least 2, got {num_perm}")
    best: tuple[float, int, int] | None = None
    for bands in range(1, num_perm + 1):
        if num_perm % bands:
            continue
        rows = num_perm // bands
        fp, _ = quad(lambda s: _collision_probability(s, bands, rows), 0.0, threshold, limit=200)
        fn, _ = quad(lambda s: 1.0 - _collision_probability(s, bands, rows), threshold, 1.0, limit=200)
        key = (fp + fn, rows)
        if best is None or key < (best[0], best[2]):
            best = (fp + fn, bands, rows)
    assert best is not None
    return BandingPlan(threshold, best[1], best[2])


class Neighbor(NamedTuple):
    user_id: str
    label: str
    jaccard: float


@lru_cache(maxsize=64)
def _digest_params(seed: int, bands: int, rows: int) -> tuple[np.ndarray, np.ndarray]:
    rng = rng_for(seed, _TAG_BAND_DIGEST)
    prime = (1 << 61) - 1
    coeffs = rng.integers(1, prime, size=(bands, rows), dtype=np.uint64)
    offsets = rng.integers(0, 1 << 64, size=bands, dtype=np.uint64)
    return coeffs, offsets


class LshIndex:
    """Mutable while building; treat as frozen once queries start."""

    def __init__(self, plan: BandingPlan, num_perm: int, seed: int):
        if plan.bands * plan.rows != num_perm:
            raise ValueError(
                f"plan {plan.bands}x{plan.rows} does not factor num_perm={num_perm}"
            )
        self.plan = plan
        self.num_perm = num_perm
        self.seed = seed
        self._buckets: list[dict[int, list[int]]] = [{} for _ in range(plan.bands)]
        self._user_ids: list[str] = []
        self._labels: list[str] = []
        self._values: list[np.ndarray] = []
        self._digests: list[np.ndarray] = []
        self._ordinals: dict[str, int] = {}

    def __len__(self) -> int:
        return len(self._user_ids)

    def __contains__(self, user_id: str) -> bool:
        return user_id in self._ordinals

    @property
    def labels(self) -> dict[str, str]:
        return dict(zip(self._user_ids, self._labels))

    def band_digests(self, values: np.ndarray) -> np.ndarray:
        """One 64-bit digest per band of a signature's value vector."""
        coeffs, offsets = _digest_params(self.seed, self.plan.bands, self.plan.rows)
        grid = fold_m61(values.reshape(self.plan.bands, self.plan.rows))
        terms = mulmod_m61(coeffs, grid)
        return terms.sum(axis=1, dtype=np.uint64) + offsets  # u64 wraparound intended

    def _check_compatible(self, sig: MinHashSignature) -> None:
        if sig.num_perm != self.num_perm or sig.seed != self.seed:
            raise IncompatibleSignatures(
                f"signature (num_perm={sig.num_perm}, seed={sig.seed}) vs "
                f"index (num_perm={self.num_perm}, seed={self.seed})"
            )

    def insert(self, sig: MinHashSignature, label: str) -> None:
        if label not in _LABEL_CODE:
            raise ValueError(f"label must be {HUMAN!r} or {BOT!r}, got {label!r}")
        self._check_compatible(sig)
        if sig.user_id in self._ordinals:
            raise DuplicateUser(sig.user_id)
        ordinal = len(self._user_ids)
        digests = self.band_digests(sig.values)
        self._user_ids.append(sig.user_id)
        self._labels.append(label)
        self._values.append(np.asarray(sig.values, dtype=np.uint64))
        self._digests.append(digests)
        self._ordinals[sig.user_id] = ordinal
        for band, digest in enumerate(digests):
            self._buckets[band].setdefault(int(digest), []).append(ordinal)

    def query(self, sig: MinHashSignature) -> list[Neighbor]:
        """Users sharing at least one band digest, with estimated Jaccard."""
        self._check_compatible(sig)
        digests = self.band_digests(sig.values)
        candidates: set[int] = set()
        for band, digest in enumerate(digests):
            candidates.update(self._buckets[band].get(int(digest), ()))
        if not candidates:
            return []
        ordered = sorted(candidates)
        stacked = np.vstack([self._values[i] for i in ordered])
        matches = np.count_nonzero(stacked == sig.values, axis=1)
        return [
            Neighbor(self._user_ids[i], self._labels[i], float(m) / self.num_perm)
            for i, m in zip(ordered, matches)
        ]

    def bucket_entry_count(self) -> int:
        return sum(len(members) for table in self._buckets for members in table.values())

    # --- persistence ---------------------------------------------------

    def save(self, path) -> None:
        with open(path, "wb") as fh:
            fh.write(
                _HEADER.pack(
                    INDEX_MAGIC,
                    INDEX_VERSION,
                    self.plan.threshold,
                    self.plan.bands,
                    self.plan.rows,
                    self.num_perm,
                    self.seed,
                    len(self._user_ids),
                )
            )
            for uid, label, values, digests in zip(
                self._user_ids, self._labels, self._values, self._digests
            ):
                raw = uid.encode("utf-8")
                fh.write(struct.pack("<HB", len(raw), _LABEL_CODE[label]))
                fh.write(raw)
                fh.write(values.astype("<u8").tobytes())
                fh.write(digests.astype("<u8").tobytes())

    @classmethod
    def load(cls, path) -> "LshIndex":
        with open(path, "rb") as fh:
            data = fh.read()
        if len(data) < _HEADER.size or data[:4] != INDEX_MAGIC:
            raise FormatError(f"not an index file: {path}")
        _, version, threshold, bands, rows, num_perm, seed, count = _HEADER.unpack_from(data)
        if version != INDEX_VERSION:
            raise FormatError(f"unsupported index version {version}")
        index = cls(BandingPlan(threshold, bands, rows), num_perm, seed)
        offset = _HEADER.size
        try:
            for _ in range(count):
                id_len, label_code = struct.unpack_from("<HB", data, offset)
                offset += 3
                uid = data[offset : offset + id_len].decode("utf-8")
                offset += id_len
                values = np.frombuffer(data, dtype="<u8", count=num_perm, offset=offset).astype(np.uint64)
                offset += 8 * num_perm
                digests = np.frombuffer(data, dtype="<u8", count=bands, offset=offset).astype(np.uint64)
                offset += 8 * bands
                ordinal = len(index._user_ids)
                index._user_ids.append(uid)
                index._labels.append(_LABEL_NAME[label_code])
                index._values.append(values)
                index._digests.append(digests)
                index._ordinals[uid] = ordinal
                for band, digest in enumerate(digests):
                    index._buckets[band].setdefault(int(digest), []).append(ordinal)
        except (struct.error, ValueError, KeyError, UnicodeDecodeError) as exc:
            raise FormatError(f"corrupt index file: {exc}") from exc
        if offset != len(data):
            raise FormatError("trailing bytes in index file")
        return index
