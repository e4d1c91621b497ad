"""End-to-end evaluation protocols: encode, sketch, index, classify, score.

Every protocol is deterministic for a fixed (dataset, RunConfig): splits,
hash families, and band digests all derive from the config seed, so reruns
produce identical classifications.  Wall-clock timings and the peak-memory
estimate are measurement metadata and are the only report fields that vary
between runs.
"""

from __future__ import annotations

import hashlib
import resource
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from itertools import product

from .classify import EvaluationReport, classify, score
from .data import Dataset, SplitSpec, cap_tweets, filter_min_length, split
from .encoding import CANONICAL_ALPHABET_ORDER, DnaSequence, UserTimeline, encode_user
from .lsh import LshIndex, lsh_plan
from .minhash import MinHashSignature, minhash, shingle

ALPHABET_SUBSETS = (
    ("B3",),
    ("B5",),
    ("B9",),
    ("B3", "B5"),
    ("B3", "B9"),
    ("B5", "B9"),
    ("B3", "B5", "B9"),
)

DEFAULT_GRID_K = tuple(range(2, 16))
DEFAULT_GRID_THRESHOLDS = tuple(round(0.1 * i, 1) for i in range(1, 10))
DEFAULT_EARLY_DETECTION_CAPS = tuple(range(20, 201, 20))
DEFAULT_GT_FRACTIONS = (0.1, 0.2, 0.3)


def canonical_alphabets(ids) -> tuple[str, ...]:
    ordered = tuple(a for a in CANONICAL_ALPHABET_ORDER if a in ids)
    if len(ordered) != len(set(ids)):
        unknown = set(ids) - set(CANONICAL_ALPHABET_ORDER)
        raise ValueError(f"unknown alphabet ids: {sorted(unknown)}")
    return ordered


@dataclass(frozen=True)
class RunConfig:
    alphabets: tuple[str, ...] = ("B3",)
    k_shingle: int = 4
    threshold: float = 0.4
    num_perm: int = 128
    seed: int = 42
    jaccard_floor: float | None = None  # None: follow the index threshold
    no_floor: bool = False
    max_tweets: int | None = None
    split: SplitSpec = field(default_factory=SplitSpec)

    def effective_floor(self) -> float:
        if self.no_floor:
            return 0.0
        return self.threshold if self.jaccard_floor is None else self.jaccard_floor


def _ids_digest(ids: tuple[str, ...]) -> str:
    h = hashlib.blake2b(digest_size=8)
    for uid in ids:
        h.update(uid.encode("utf-8"))
        h.update(b"\x00")
    return h.hexdigest()


def _split_echo(spec: SplitSpec) -> dict:
    if spec.mode == "fixed_lists":
        return {
            "mode": spec.mode,
            "gt_count": len(spec.gt_ids),
            "test_count": len(spec.test_ids),
            "ids_digest": _ids_digest(spec.gt_ids + ("|",) + spec.test_ids),
        }
    return {"mode": spec.mode, "gt_fraction": spec.gt_fraction, "seed": spec.seed}


def config_echo(cfg: RunConfig) -> dict:
    return {
        "alphabets": list(cfg.alphabets),
        "k_shingle": cfg.k_shingle,
        "threshold": cfg.threshold,
        "num_perm": cfg.num_perm,
        "seed": cfg.seed,
        "jaccard_floor": cfg.effective_floor(),
        "max_tweets": cfg.max_tweets,
        "split": _split_echo(cfg.split),
    }


def _now() -> float:
    return time.perf_counter()


def _peak_rss_mb() -> float:
    return round(resource.getrusage(resource.RUSAGE_SELF).ru_maxrss / 1024.0, 1)


def signature_for(timeline: UserTimeline, cfg: RunConfig) -> MinHashSignature:
    """Encode -> shingle -> minhash for one user under a config."""
    seq = encode_user(timeline, cfg.alphabets)
    return minhash(shingle(seq, cfg.k_shingle), cfg.num_perm, cfg.seed)


def new_index(cfg: RunConfig) -> LshIndex:
    return LshIndex(lsh_plan(cfg.threshold, cfg.num_perm), cfg.num_perm, cfg.seed)


def build_index(users: list[UserTimeline], cfg: RunConfig) -> LshIndex:
    """Index every labeled user's signature."""
    index = new_index(cfg)
    for user in users:
        index.insert(signature_for(user, cfg), user.label)
    return index


def preprocess(ds: Dataset, cfg: RunConfig) -> tuple[Dataset, int]:
    if cfg.max_tweets is not None:
        ds = cap_tweets(ds, cfg.max_tweets)
    return filter_min_length(ds, cfg.k_shingle, cfg.alphabets)


def evaluate(ds: Dataset, cfg: RunConfig) -> EvaluationReport:
    """Full protocol: preprocess, split, build ground-truth index, classify.

    Timings: ``preprocess_s`` covers capping/filtering and signature
    generation for both sides, ``build_s`` the index construction,
    ``classify_s`` querying, voting, and scoring.
    """
    t0 = _now()
    filtered, removed = preprocess(ds, cfg)
    gt_ds, test_ds = split(filtered, cfg.split)
    gt_sigs = [signature_for(u, cfg) for u in gt_ds.users]
    test_sigs = [signature_for(u, cfg) for u in test_ds.users]
    t1 = _now()

    index = new_index(cfg)
    for sig, user in zip(gt_sigs, gt_ds.users):
        index.insert(sig, user.label)
    t2 = _now()

    floor = cfg.effective_floor()
    predictions = [classify(index, sig, floor) for sig in test_sigs]
    truth = {u.user_id: u.label for u in test_ds.users}
    report = score(predictions, truth, config=config_echo(cfg))
    t3 = _now()

    report.counts = {
        "dataset_users": len(ds),
        "removed_short": removed,
        "malformed_records": ds.malformed_count,
        "ground_truth_users": len(gt_ds),
        "test_users": len(test_ds),
    }
    report.timings = {
        "preprocess_s": round(t1 - t0, 3),
        "build_s": round(t2 - t1, 3),
        "classify_s": round(t3 - t2, 3),
    }
    report.memory = {"peak_rss_mb": _peak_rss_mb(), "note": "approximate"}
    return report


def cross_dataset(gt_ds: Dataset, test_ds: Dataset, cfg: RunConfig) -> EvaluationReport:
    """Build the index from one dataset, classify another in full."""
    t0 = _now()
    gt_filtered, gt_removed = preprocess(gt_ds, cfg)
    test_filtered, test_removed = preprocess(test_ds, cfg)
    gt_users = gt_filtered.labeled()
    gt_sigs = [signature_for(u, cfg) for u in gt_users]
    test_sigs = [signature_for(u, cfg) for u in test_filtered.users]
    t1 = _now()

    index = new_index(cfg)
    for sig, user in zip(gt_sigs, gt_users):
        index.insert(sig, user.label)
    t2 = _now()

    floor = cfg.effective_floor()
    predictions = [classify(index, sig, floor) for sig in test_sigs]
    truth = {u.user_id: u.label for u in test_filtered.users}
    echo = dict(config_echo(cfg), ground_truth_dataset=gt_ds.name, test_dataset=test_ds.name)
    report = score(predictions, truth, config=echo)
    t3 = _now()

    report.counts = {
        "dataset_users": len(gt_ds) + len(test_ds),
        "removed_short": gt_removed + test_removed,
        "malformed_records": gt_ds.malformed_count + test_ds.malformed_count,
        "ground_truth_users": len(gt_users),
        "test_users": len(test_filtered),
    }
    report.timings = {
        "preprocess_s": round(t1 - t0, 3),
        "build_s": round(t2 - t1, 3),
        "classify_s": round(t3 - t2, 3),
    }
    report.memory = {"peak_rss_mb": _peak_rss_mb(), "note": "approximate"}
    return report


def _grid_cell(args) -> EvaluationReport:
    ds, cfg = args
    return evaluate(ds, cfg)


def _rank_key(report: EvaluationReport):
    f1 = report.f1 if report.f1 is not None else -1.0
    cfg = report.config
    return (-f1, cfg["k_shingle"], -cfg["threshold"], tuple(cfg["alphabets"]))


def grid_search(
    ds: Dataset,
    base: RunConfig,
    ks=DEFAULT_GRID_K,
    thresholds=DEFAULT_GRID_THRESHOLDS,
    alphabet_subsets=ALPHABET_SUBSETS,
    jobs: int = 1,
) -> list[EvaluationReport]:
    """Evaluate every grid cell under the shared split seed; rank by F1.

    Ties break toward smaller k, then larger threshold.  Cell execution
    order never affects the ranking.
    """
    cells = [
        replace(base, alphabets=canonical_alphabets(alphas), k_shingle=k, threshold=t)
        for alphas, k, t in product(alphabet_subsets, ks, thresholds)
    ]
    if not cells:
        raise ValueError("empty grid")
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            reports = list(pool.map(_grid_cell, ((ds, cfg) for cfg in cells)))
    else:
        reports = [evaluate(ds, cfg) for cfg in cells]
    return sorted(reports, key=_rank_key)


def early_detection(ds: Dataset, cfg: RunConfig, caps=DEFAULT_EARLY_DETECTION_CAPS) -> list[tuple[int, EvaluationReport]]:
    """Cap each user to their first K posts and re-evaluate on one split.

    The ground-truth/test membership is decided once on the uncapped
    dataset and frozen; users whose capped sequence falls below the
    shingle width are dropped from their side for that K.
    """
    caps = list(caps)
    if caps != sorted(caps) or any(k < 1 for k in caps):
        raise ValueError("caps must be positive and ascending")
    filtered, _ = preprocess(ds, cfg)
    gt_ds, test_ds = split(filtered, cfg.split)
    gt_ids = tuple(u.user_id for u in gt_ds.users)
    test_ids = tuple(u.user_id for u in test_ds.users)

    results = []
    for cap in caps:
        capped, _ = filter_min_length(cap_tweets(ds, cap), cfg.k_shingle, cfg.alphabets)
        surviving = {u.user_id for u in capped.users}
        spec = SplitSpec(
            mode="fixed_lists",
            gt_ids=tuple(u for u in gt_ids if u in surviving),
            test_ids=tuple(u for u in test_ids if u in surviving),
        )
        run_cfg = replace(cfg, max_tweets=cap, split=spec)
        results.append((cap, evaluate(ds, run_cfg)))
    return results


def gt_sweep(ds: Dataset, cfg: RunConfig, fractions=DEFAULT_GT_FRACTIONS) -> list[tuple[float, EvaluationReport]]:
    """Re-evaluate with increasing ground-truth fractions under one seed.

    The per-label shuffle is fixed by the seed, so smaller fractions use
    prefixes of the larger ones and the test side shrinks accordingly.
    """
    if cfg.split.mode != "random_fraction":
        raise ValueError("gt_sweep requires a random_fraction split spec")
    results = []
    for fraction in fractions:
        if not 0.0 < fraction < 1.0:
            raise ValueError(f"fraction {fraction} outside (0, 1)")
        run_cfg = replace(cfg, split=replace(cfg.split, gt_fraction=fraction))
        results.append((fraction, evaluate(ds, run_cfg)))
    return results


def encode_dataset(ds: Dataset, alphabets) -> list[DnaSequence]:
    """Debug helper: the DNA string of every user in the dataset."""
    return [encode_user(u, alphabets) for u in ds.users]


def classify_against_index(
    index: LshIndex, ds: Dataset, cfg: RunConfig
) -> tuple[list, EvaluationReport | None]:
    """Classify a query dataset against a persisted index.

    Returns per-user predictions, plus a scored report when every query
    carries a truth label.
    """
    filtered, removed = preprocess(ds, cfg)
    predictions = []
    floor = cfg.effective_floor()
    for user in filtered.users:
        predictions.append(classify(index, signature_for(user, cfg), floor))
    report = None
    if filtered.users and all(u.label in ("human", "bot") for u in filtered.users):
        truth = {u.user_id: u.label for u in filtered.users}
        report = score(predictions, truth, config=config_echo(cfg))
        report.counts = {
            "dataset_users": len(ds),
            "removed_short": removed,
            "malformed_records": ds.malformed_count,
            "ground_truth_users": len(index),
            "test_users": len(filtered),
        }
    return predictions, report
