"""Cosine search: oracle scan, blocked fast scan, and fraud policies."""

from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from claimguard.errors import DimensionMismatchError, LayoutMismatchError
from claimguard.features import FusedDescriptor, FusionConfig
from claimguard.matcher import (
    FraudMode,
    FraudPolicy,
    cosine_similarity,
    fraud_check,
    search,
    search_fast,
)
from claimguard.store import EnrolledFeature

from conftest import enroll_one, make_claim, make_descriptor


def plain_config(dim: int) -> FusionConfig:
    # Any block split works for raw-vector tests; hist disabled.
    return FusionConfig(local_dim=dim - 1, global_dim=1, hist_bins=0)


def feature(values, seq: int, claim=None, vehicle="V", image=None) -> EnrolledFeature:
    values = np.asarray(values, dtype=np.float64)
    config = plain_config(len(values))
    return EnrolledFeature(
        claim_id=claim or f"c{seq}",
        vehicle_id=vehicle,
        image_id=image or f"i{seq}",
        descriptor=FusedDescriptor(layout=config, values=values),
        enrolled_at=0,
        enrollment_seq=seq,
    )


def probe_of(values) -> FusedDescriptor:
    values = np.asarray(values, dtype=np.float64)
    return FusedDescriptor(layout=plain_config(len(values)), values=values)


class TestCosine:
    def test_parallel_vectors(self):
        assert cosine_similarity(np.array([1.0, 0.0]), np.array([1.0, 0.0])) == 1.0

    def test_orthogonal_vectors(self):
        assert cosine_similarity(np.array([1.0, 0.0]), np.array([0.0, 1.0])) == 0.0

    def test_hand_computed_value(self):
        # 32 / (sqrt(14) * sqrt(77))
        expected = 32.0 / (math.sqrt(14.0) * math.sqrt(77.0))
        got = cosine_similarity(np.array([1.0, 2.0, 3.0]), np.array([4.0, 5.0, 6.0]))
        assert abs(got - expected) <= 1e-12
        assert abs(got - 0.974632) <= 1e-6

    def test_zero_norm_convention(self):
        assert cosine_similarity(np.zeros(3), np.array([1.0, 2.0, 3.0])) == 0.0

    def test_dim_mismatch(self):
        with pytest.raises(DimensionMismatchError):
            cosine_similarity(np.ones(3), np.ones(4))

    @given(seed=st.integers(0, 2**32 - 1))
    @settings(max_examples=100)
    def test_symmetry(self, seed):
        rng = np.random.default_rng(seed)
        a, b = rng.normal(size=8), rng.normal(size=8)
        assert cosine_similarity(a, b) == cosine_similarity(b, a)

    def test_clamped_to_unit_range(self):
        # Accumulated rounding can push |cos| past 1 without the clamp.
        vec = np.full(1000, 1e-3)
        assert cosine_similarity(vec, vec) == 1.0


class TestSearch:
    def test_hand_cosines_and_order(self):
        gallery = [
            feature([1.0, 0.0], 0),
            feature([0.6, 0.8], 1),
            feature([0.0, 1.0], 2),
        ]
        results = search(probe_of([1.0, 0.0]), gallery, k=3)
        assert [r.claim_id for r in results] == ["c0", "c1", "c2"]
        np.testing.assert_allclose([r.similarity for r in results], [1.0, 0.6, 0.0], atol=1e-12)
        assert [r.rank for r in results] == [1, 2, 3]

    def test_exact_probe_is_rank_one(self):
        rng = np.random.default_rng(0)
        gallery = [feature(rng.normal(size=8), seq) for seq in range(20)]
        probe = FusedDescriptor(
            layout=gallery[7].descriptor.layout, values=gallery[7].descriptor.values.copy()
        )
        results = search(probe, gallery, k=1)
        assert results[0].claim_id == "c7"
        assert abs(results[0].similarity - 1.0) <= 1e-6

    def test_k_clamps_to_gallery_size(self):
        rng = np.random.default_rng(1)
        gallery = [feature(rng.normal(size=4), seq) for seq in range(4)]
        assert len(search(probe_of(rng.normal(size=4)), gallery, k=10)) == 4

    def test_tie_breaks_by_enrollment_seq(self):
        same = [1.0, 1.0]
        gallery = [feature(same, 5), feature(same, 2), feature(same, 9)]
        results = search(probe_of(same), gallery, k=3)
        assert [r.claim_id for r in results] == ["c2", "c5", "c9"]

    def test_filter_is_applied(self):
        gallery = [feature([1.0, 0.0], 0, vehicle="A"), feature([1.0, 0.0], 1, vehicle="B")]
        results = search(
            probe_of([1.0, 0.0]), gallery, k=5, gallery_filter=lambda f: f.vehicle_id == "B"
        )
        assert [r.claim_id for r in results] == ["c1"]

    def test_layout_mismatch_identified(self):
        gallery = [feature([1.0, 0.0, 0.0], 0)]
        with pytest.raises(LayoutMismatchError, match="c0"):
            search(probe_of([1.0, 0.0]), gallery, k=1)


class TestSearchFastEquivalence:
    @staticmethod
    def assert_equivalent(probe, gallery, k):
        slow = search(probe, gallery, k)
        fast = search_fast(probe, gallery, k)
        assert [r.claim_id for r in slow] == [r.claim_id for r in fast]
        assert [r.rank for r in slow] == [r.rank for r in fast]
        for a, b in zip(slow, fast):
            assert abs(a.similarity - b.similarity) <= 1e-6

    @given(seed=st.integers(0, 2**32 - 1))
    @settings(max_examples=60, deadline=None)
    def test_random_galleries(self, seed):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(1, 200))
        dim = int(rng.integers(2, 32))
        k = int(rng.integers(1, n + 4))
        gallery = [feature(rng.normal(size=dim), seq) for seq in range(n)]
        probe = probe_of(rng.normal(size=dim))
        self.assert_equivalent(probe, gallery, k)

    def test_duplicate_vectors_keep_seq_order(self):
        rng = np.random.default_rng(2)
        base = rng.normal(size=6)
        gallery = [feature(base, seq) for seq in range(50)]
        self.assert_equivalent(probe_of(base), gallery, 10)

    def test_zero_probe(self):
        rng = np.random.default_rng(3)
        gallery = [feature(rng.normal(size=4), seq) for seq in range(10)]
        self.assert_equivalent(probe_of(np.zeros(4)), gallery, 5)

    def test_zero_gallery_rows(self):
        rng = np.random.default_rng(4)
        gallery = [feature(np.zeros(4), 0), feature(rng.normal(size=4), 1)]
        self.assert_equivalent(probe_of(rng.normal(size=4)), gallery, 2)

    def test_empty_gallery(self):
        assert search_fast(probe_of([1.0, 0.0]), [], 5) == []

    def test_block_boundary_sizes(self):
        # Exercise the blocked scan across its internal chunk boundary.
        import claimguard.matcher as matcher_mod

        rng = np.random.default_rng(5)
        old = matcher_mod._BLOCK_ROWS
        matcher_mod._BLOCK_ROWS = 16
        try:
            gallery = [feature(rng.normal(size=8), seq) for seq in range(53)]
            self.assert_equivalent(probe_of(rng.normal(size=8)), gallery, 7)
        finally:
            matcher_mod._BLOCK_ROWS = old

    @given(seed=st.integers(0, 2**32 - 1), scale=st.floats(0.001, 1000.0))
    @settings(max_examples=50, deadline=None)
    def test_ranking_invariant_under_positive_scaling(self, seed, scale):
        rng = np.random.default_rng(seed)
        gallery = [feature(rng.normal(size=6), seq) for seq in range(30)]
        probe = probe_of(rng.normal(size=6))
        baseline = [r.claim_id for r in search(probe, gallery, 10)]
        scaled_gallery = [
            feature(f.descriptor.values * scale, f.enrollment_seq) for f in gallery
        ]
        scaled_probe = probe_of(probe.values * scale)
        assert [r.claim_id for r in search(scaled_probe, scaled_gallery, 10)] == baseline


class TestFraudCheck:
    def test_duplicate_descriptor_flags(self, store):
        rng = np.random.default_rng(10)
        descriptor = make_descriptor(rng)
        enroll_one(store, make_claim("orig", vehicle_id="V1"), [descriptor])
        assessment = fraud_check(
            "new", "V2", [descriptor], store, FraudPolicy(threshold=0.9)
        )
        assert assessment.flagged
        assert assessment.best is not None
        assert assessment.best.claim_id == "orig"
        assert abs(assessment.best.similarity - 1.0) <= 1e-6

    def test_empty_history_not_flagged(self, store):
        rng = np.random.default_rng(11)
        assessment = fraud_check("new", "V1", [make_descriptor(rng)], store)
        assert not assessment.flagged
        assert assessment.best is None
        assert assessment.matches == ()

    def test_own_claim_always_excluded(self, store):
        rng = np.random.default_rng(12)
        descriptor = make_descriptor(rng)
        enroll_one(store, make_claim("mine", vehicle_id="V1"), [descriptor])
        assessment = fraud_check("mine", "V1", [descriptor], store, FraudPolicy(threshold=0.0))
        assert all(m.claim_id != "mine" for m in assessment.matches)
        assert assessment.best is None

    def test_same_vehicle_mode_restricts_gallery(self, store):
        rng = np.random.default_rng(13)
        descriptor = make_descriptor(rng)
        enroll_one(store, make_claim("other-vehicle", vehicle_id="V2"), [descriptor])
        cross = fraud_check(
            "new", "V1", [descriptor], store,
            FraudPolicy(mode=FraudMode.CROSS_VEHICLE, threshold=0.99),
        )
        same = fraud_check(
            "new", "V1", [descriptor], store,
            FraudPolicy(mode=FraudMode.SAME_VEHICLE, threshold=0.99),
        )
        assert cross.flagged
        assert not same.flagged and same.best is None

    def test_flag_monotone_in_threshold(self, store):
        rng = np.random.default_rng(14)
        target = make_descriptor(rng)
        enroll_one(store, make_claim("hist", vehicle_id="V9"), [target])
        probe = make_descriptor(rng)
        sims = []
        for threshold in np.linspace(-1, 1, 21):
            assessment = fraud_check(
                "new", "V1", [probe], store, FraudPolicy(threshold=float(threshold))
            )
            sims.append(assessment.flagged)
        # once unflagged at some threshold, never flagged again above it
        assert sims == sorted(sims, reverse=True)

    def test_best_is_max_over_probe_descriptors(self, store):
        rng = np.random.default_rng(15)
        enrolled = make_descriptor(rng)
        enroll_one(store, make_claim("hist", vehicle_id="V1"), [enrolled])
        far = make_descriptor(rng)
        exact = FusedDescriptor(layout=enrolled.layout, values=enrolled.values.copy())
        assessment = fraud_check("new", "V2", [far, exact], store, FraudPolicy(threshold=0.99))
        assert assessment.flagged
        assert abs(assessment.best.similarity - 1.0) <= 1e-6
