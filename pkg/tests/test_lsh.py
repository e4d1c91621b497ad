import numpy as np
import pytest

from botdna.errors import DuplicateUser, FormatError, IncompatibleSignatures
from botdna.lsh import BandingPlan, LshIndex, Neighbor, lsh_plan
from botdna.minhash import MinHashSignature, minhash

from conftest import exact_jaccard, make_set_pair


def sig_of(shingle_set, num_perm=128, seed=1):
    return minhash(shingle_set, num_perm, seed)


def riemann_scurve_error(threshold, bands, rows, steps=20000):
    """Independent plan-cost oracle: midpoint-rule integration."""
    xs = (np.arange(steps) + 0.5) / steps
    f = 1.0 - (1.0 - xs**rows) ** bands
    fp = np.sum(f[xs < threshold]) / steps
    fn = np.sum(1.0 - f[xs >= threshold]) / steps
    return fp + fn


class TestLshPlan:
    def test_high_threshold_maximizes_rows(self):
        plan = lsh_plan(1.0, 128)
        assert plan.rows == 128 and plan.bands == 1

    def test_low_threshold_maximizes_bands(self):
        plan = lsh_plan(0.001, 128)
        assert plan.bands == 128 and plan.rows == 1

    @pytest.mark.parametrize("threshold", [0.1, 0.2, 0.4, 0.5, 0.7, 0.9])
    @pytest.mark.parametrize("num_perm", [128, 256, 60])
    def test_matches_brute_force_oracle(self, threshold, num_perm):
        factorizations = [
            (b, num_perm // b) for b in range(1, num_perm + 1) if num_perm % b == 0
        ]
        errors = {
            (b, r): riemann_scurve_error(threshold, b, r) for b, r in factorizations
        }
        expected = min(factorizations, key=lambda br: (errors[br], br[1]))
        plan = lsh_plan(threshold, num_perm)
        assert (plan.bands, plan.rows) == expected

    def test_threshold_04_128_regression(self):
        # Frozen from the brute-force oracle above.
        plan = lsh_plan(0.4, 128)
        assert (plan.bands, plan.rows) == (32, 4)

    def test_prime_num_perm_never_fails(self):
        plan = lsh_plan(0.5, 127)
        assert (plan.bands, plan.rows) in {(1, 127), (127, 1)}

    def test_invalid_arguments(self):
        with pytest.raises(ValueError):
            lsh_plan(0.0, 128)
        with pytest.raises(ValueError):
            lsh_plan(1.5, 128)
        with pytest.raises(ValueError):
            lsh_plan(0.5, 1)


def fresh_index(threshold=0.4, num_perm=128, seed=1):
    return LshIndex(lsh_plan(threshold, num_perm), num_perm, seed)


class TestInsert:
    def test_self_query_after_insert(self):
        index = fresh_index()
        rng = np.random.Generator(np.random.Philox(key=5))
        a, _ = make_set_pair(0.5, 100, rng)
        sig = sig_of(a)
        index.insert(sig, "bot")
        got = index.query(sig)
        assert got == [Neighbor("set-a", "bot", 1.0)]

    def test_identical_signatures_both_returned(self):
        index = fresh_index()
        rng = np.random.Generator(np.random.Philox(key=6))
        a, b = make_set_pair(1.0, 100, rng)
        index.insert(sig_of(a), "bot")
        index.insert(sig_of(b), "human")
        got = index.query(sig_of(a))
        assert {(n.user_id, n.label, n.jaccard) for n in got} == {
            ("set-a", "bot", 1.0),
            ("set-b", "human", 1.0),
        }

    def test_bucket_entry_conservation(self):
        index = fresh_index()
        rng = np.random.Generator(np.random.Philox(key=7))
        n = 25
        for i in range(n):
            a, _ = make_set_pair(0.5, 60, rng)
            index.insert(
                MinHashSignature(f"u{i}", 128, 1, sig_of(a).values), "human" if i % 2 else "bot"
            )
        assert index.bucket_entry_count() == n * index.plan.bands

    def test_duplicate_user_rejected(self):
        index = fresh_index()
        rng = np.random.Generator(np.random.Philox(key=8))
        a, _ = make_set_pair(0.5, 60, rng)
        index.insert(sig_of(a), "bot")
        with pytest.raises(DuplicateUser):
            index.insert(sig_of(a), "bot")

    def test_incompatible_signature_rejected(self):
        index = fresh_index(seed=1)
        rng = np.random.Generator(np.random.Philox(key=9))
        a, _ = make_set_pair(0.5, 60, rng)
        with pytest.raises(IncompatibleSignatures):
            index.insert(minhash(a, 128, seed=2), "bot")
        with pytest.raises(IncompatibleSignatures):
            index.insert(minhash(a, 64, seed=1), "bot")

    def test_bad_label_rejected(self):
        index = fresh_index()
        rng = np.random.Generator(np.random.Philox(key=10))
        a, _ = make_set_pair(0.5, 60, rng)
        with pytest.raises(ValueError):
            index.insert(sig_of(a), "cyborg")

    def test_plan_must_factor_num_perm(self):
        with pytest.raises(ValueError):
            LshIndex(BandingPlan(0.4, 3, 5), 128, 1)


class TestQuery:
    def test_empty_index(self):
        index = fresh_index()
        rng = np.random.Generator(np.random.Philox(key=11))
        a, _ = make_set_pair(0.5, 60, rng)
        assert index.query(sig_of(a)) == []

    def test_pair_above_threshold_usually_retrieved(self):
        # Exact Jaccard 0.6 >= threshold 0.4 + 0.15; the (32, 4) plan gives
        # collision probability 1-(1-0.6**4)**32 ~= 0.988, so at least 90
        # of 100 seeded trials must retrieve the partner.
        hits = 0
        for trial in range(100):
            rng = np.random.Generator(np.random.Philox(key=3000 + trial))
            a, b = make_set_pair(0.6, 100, rng)
            assert exact_jaccard(a, b) == 0.6
            index = fresh_index()
            index.insert(sig_of(a), "bot")
            if any(n.user_id == "set-a" for n in index.query(sig_of(b))):
                hits += 1
        assert hits >= 90

    def test_identical_pair_always_retrieved(self):
        for trial in range(20):
            rng = np.random.Generator(np.random.Philox(key=4000 + trial))
            a, b = make_set_pair(1.0, 80, rng)
            index = fresh_index()
            index.insert(sig_of(a), "human")
            got = index.query(sig_of(b))
            assert [n.user_id for n in got] == ["set-a"]
            assert got[0].jaccard == 1.0

    def test_single_row_plan_matches_brute_force(self):
        # With rows=1 every shared minimum forces a collision: candidates
        # must equal the brute-force set of users sharing any position.
        num_perm = 16
        index = LshIndex(BandingPlan(0.01, num_perm, 1), num_perm, seed=3)
        rng = np.random.Generator(np.random.Philox(key=12))
        sigs = []
        for i in range(60):
            a, _ = make_set_pair(0.5, 30, rng)
            s = MinHashSignature(f"u{i}", num_perm, 3, minhash(a, num_perm, 3).values)
            sigs.append(s)
            index.insert(s, "bot" if i % 3 else "human")
        for probe in sigs[:10]:
            got = {n.user_id for n in index.query(probe)}
            expected = {
                s.user_id for s in sigs if np.any(s.values == probe.values)
            }
            assert got == expected

    def test_neighbor_jaccard_matches_estimate(self):
        index = fresh_index()
        rng = np.random.Generator(np.random.Philox(key=13))
        a, b = make_set_pair(0.8, 100, rng)
        index.insert(sig_of(a), "bot")
        got = index.query(sig_of(b))
        if got:  # retrieval at J=0.8 is near-certain but not guaranteed
            from botdna.minhash import estimate_jaccard

            assert got[0].jaccard == pytest.approx(estimate_jaccard(sig_of(a), sig_of(b)))


class TestPersistence:
    def test_round_trip_queries_identical(self, tmp_path):
        index = fresh_index(threshold=0.3, num_perm=64, seed=9)
        rng = np.random.Generator(np.random.Philox(key=14))
        probes = []
        for i in range(40):
            a, b = make_set_pair(0.6, 80, rng)
            values = minhash(a, 64, 9).values
            index.insert(MinHashSignature(f"u{i}", 64, 9, values), "bot" if i % 2 else "human")
            probes.append(minhash(b, 64, 9))
        path = tmp_path / "index.bin"
        index.save(path)
        loaded = LshIndex.load(path)
        assert loaded.plan == index.plan
        assert loaded.labels == index.labels
        for probe in probes:
            assert loaded.query(probe) == index.query(probe)

    def test_save_is_stable_across_round_trips(self, tmp_path):
        index = fresh_index(num_perm=32)
        rng = np.random.Generator(np.random.Philox(key=15))
        for i in range(10):
            a, _ = make_set_pair(0.4, 50, rng)
            index.insert(MinHashSignature(f"u{i}", 32, 1, minhash(a, 32, 1).values), "bot")
        p1, p2 = tmp_path / "a.bin", tmp_path / "b.bin"
        index.save(p1)
        LshIndex.load(p1).save(p2)
        assert p1.read_bytes() == p2.read_bytes()

    def test_load_rejects_garbage(self, tmp_path):
        path = tmp_path / "junk.bin"
        path.write_bytes(b"not an index at all")
        with pytest.raises(FormatError):
            LshIndex.load(path)

    def test_load_rejects_truncation(self, tmp_path):
        index = fresh_index(num_perm=32)
        rng = np.random.Generator(np.random.Philox(key=16))
        a, _ = make_set_pair(0.4, 50, rng)
        index.insert(MinHashSignature("u0", 32, 1, minhash(a, 32, 1).values), "bot")
        path = tmp_path / "index.bin"
        index.save(path)
        blob = path.read_bytes()
        path.write_bytes(blob[:-5])
        with pytest.raises(FormatError):
            LshIndex.load(path)
