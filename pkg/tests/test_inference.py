import math

import numpy as np
import pytest

from pocrm.inference import (
    EstimateSnapshot,
    PriorSpec,
    Skeleton,
    TrialState,
    bma_estimates,
    indifference_skeleton,
    log_likelihood,
    marginal_likelihood,
    pocrm_estimates,
    posterior_dose_expectations,
    posterior_mean_a,
    posterior_model_probs,
    working_model,
)
from pocrm.orderings import DoseGrid, OrderingSet, SimpleOrdering, standard_orderings

from _oracle import riemann_ordering, riemann_summary

PRIOR = PriorSpec()

# A small two-ordering fixture on the 2x2 grid.  One patient without DLT and
# one with DLT at d2, one patient without DLT at d3: the data mildly favour
# the ordering that ranks d3 before d2.  All expected numbers below were
# computed with the 10^6-point Riemann reference in _oracle.py and frozen.
TWO_BY_TWO = OrderingSet.uniform([(1, 2, 3, 4), (1, 3, 2, 4)])
TWO_BY_TWO_SKELETON = Skeleton((0.12, 0.25, 0.40, 0.55))
TWO_BY_TWO_STATE = TrialState(4, ((2, 0), (2, 1), (3, 0)))

TWO_BY_TWO_MARGINALS = (0.06118811993151711, 0.10064863809694842)
TWO_BY_TWO_PROBS = (0.37808542803826256, 0.6219145719617375)
TWO_BY_TWO_POST_MEANS = (-0.22469684830787648, -0.03946502169920461)
TWO_BY_TWO_PLUG_IN = (
    0.13026076877790985,
    0.4144373096323314,
    0.26377739567213093,
    0.5628721025367124,
)
TWO_BY_TWO_AVERAGED = (
    0.18946177269624057,
    0.3815525415382485,
    0.35270841337473946,
    0.5599726736263054,
)


def test_working_model_frozen_points():
    # 0.2^exp(-0.5), cross-checked against 40-digit arithmetic
    assert working_model(0.2, -0.5) == pytest.approx(0.3767500010098233, rel=1e-12)
    assert working_model(0.5, math.log(2.0)) == pytest.approx(0.25, rel=1e-12)
    assert working_model(0.3, 0.0) == pytest.approx(0.3, rel=1e-15)


def test_working_model_monotone():
    # larger a shrinks alpha^exp(a) for alpha < 1; larger alpha raises it
    for alpha in (0.05, 0.3, 0.7):
        values = [working_model(alpha, a) for a in np.linspace(-2, 2, 9)]
        assert all(b < a for a, b in zip(values, values[1:]))
    for a in (-1.0, 0.0, 1.0):
        values = [working_model(alpha, a) for alpha in np.linspace(0.05, 0.9, 9)]
        assert all(b > a for a, b in zip(values, values[1:]))
    assert 0.0 < working_model(0.5, 5.0) < 1.0  # steep slope still yields a probability


def test_log_likelihood_matches_direct_sum():
    ordering = SimpleOrdering((1, 3, 2, 4))
    skeleton = TWO_BY_TWO_SKELETON
    state = TWO_BY_TWO_STATE
    for a in (-1.2, 0.0, 0.7):
        expected = 0.0
        for dose, dlt in state.observations:
            rank = ordering.sequence.index(dose)
            psi = skeleton.alpha[rank] ** math.exp(a)
            expected += math.log(psi) if dlt else math.log(1.0 - psi)
        assert log_likelihood(state, ordering, skeleton, a) == pytest.approx(expected, rel=1e-12)


class TestSingleDose:
    ordering = SimpleOrdering((1,))
    skeleton = Skeleton((0.3,))

    def test_one_dlt_frozen(self):
        state = TrialState(1, ((1, 1),))
        ml = marginal_likelihood(state, self.ordering, self.skeleton, PRIOR)
        assert ml == pytest.approx(0.34278383732736945, rel=1e-9)
        ahat = posterior_mean_a(state, self.ordering, self.skeleton, PRIOR)
        assert ahat == pytest.approx(-0.9114660333210679, rel=1e-9)
        ex = posterior_dose_expectations(state, self.ordering, self.skeleton, PRIOR)
        assert ex[0] == pytest.approx(0.5738125968814519, rel=1e-9)

    def test_empty_state(self):
        state = TrialState(1)
        assert marginal_likelihood(state, self.ordering, self.skeleton, PRIOR) == pytest.approx(
            1.0, abs=1e-9
        )
        assert abs(posterior_mean_a(state, self.ordering, self.skeleton, PRIOR)) < 1e-9

    def test_prior_mean_identity(self):
        # E_prior[psi] equals the marginal likelihood of a single observed DLT
        prior_mean = posterior_dose_expectations(TrialState(1), self.ordering, self.skeleton, PRIOR)
        one_dlt_ml = marginal_likelihood(TrialState(1, ((1, 1),)), self.ordering, self.skeleton, PRIOR)
        assert prior_mean[0] == pytest.approx(one_dlt_ml, rel=1e-10)


def test_two_by_two_frozen_probs():
    probs = posterior_model_probs(TWO_BY_TWO_STATE, TWO_BY_TWO, TWO_BY_TWO_SKELETON, PRIOR)
    assert probs == pytest.approx(TWO_BY_TWO_PROBS, rel=1e-9)
    for m, ordering in enumerate(TWO_BY_TWO.orderings):
        ml = marginal_likelihood(TWO_BY_TWO_STATE, ordering, TWO_BY_TWO_SKELETON, PRIOR)
        assert ml == pytest.approx(TWO_BY_TWO_MARGINALS[m], rel=1e-9)


def test_two_by_two_frozen_selection_snapshot():
    snap = pocrm_estimates(TWO_BY_TWO_STATE, TWO_BY_TWO, TWO_BY_TWO_SKELETON, PRIOR)
    assert snap.method == "selection"
    assert snap.selected_ordering == 2
    assert snap.estimates == pytest.approx(TWO_BY_TWO_PLUG_IN, rel=1e-9)
    assert snap.posterior_means == pytest.approx(TWO_BY_TWO_POST_MEANS, rel=1e-9)
    assert snap.ordering_probs == pytest.approx(TWO_BY_TWO_PROBS, rel=1e-9)


def test_two_by_two_frozen_averaged_snapshot():
    snap = bma_estimates(TWO_BY_TWO_STATE, TWO_BY_TWO, TWO_BY_TWO_SKELETON, PRIOR)
    assert snap.method == "averaging"
    assert snap.selected_ordering is None
    assert snap.estimates == pytest.approx(TWO_BY_TWO_AVERAGED, rel=1e-9)


def test_selection_ties_pick_lowest_index():
    # duplicate orderings have identical marginals; the first must win
    oset = OrderingSet.uniform([(1, 2, 3, 4), (1, 2, 3, 4), (1, 3, 2, 4)])
    snap = pocrm_estimates(TWO_BY_TWO_STATE, oset, TWO_BY_TWO_SKELETON, PRIOR)
    probs = posterior_model_probs(TWO_BY_TWO_STATE, oset, TWO_BY_TWO_SKELETON, PRIOR)
    assert probs[0] == pytest.approx(probs[1], rel=1e-12)
    if probs[0] >= probs[2]:
        assert snap.selected_ordering == 1


def test_matches_riemann_oracle_live():
    rng = np.random.default_rng(20260823)
    for trial in range(6):
        k = int(rng.integers(2, 6))
        m = int(rng.integers(1, 4))
        alpha = tuple(np.sort(rng.uniform(0.03, 0.92, size=k)))
        seqs = []
        for _ in range(m):
            perm = rng.permutation(k) + 1
            seqs.append(tuple(int(v) for v in perm))
        n = rng.integers(0, 3, size=k).astype(float)
        y = np.array([float(rng.integers(0, int(c) + 1)) for c in n])
        state = _state_from_counts(n, y)
        oset = OrderingSet.uniform(seqs)
        ref = riemann_summary(n, y, seqs, alpha)
        skel = Skeleton(alpha)
        probs = posterior_model_probs(state, oset, skel, PRIOR)
        assert probs == pytest.approx(ref["probs"], rel=1e-6)
        sel = pocrm_estimates(state, oset, skel, PRIOR)
        assert sel.estimates == pytest.approx(ref["plug_in"], rel=1e-6)
        avg = bma_estimates(state, oset, skel, PRIOR)
        assert avg.estimates == pytest.approx(ref["averaged"], rel=1e-6)


def _state_from_counts(n, y):
    obs = []
    for dose0, (total, dlts) in enumerate(zip(n, y)):
        obs.extend([(dose0 + 1, 1)] * int(dlts))
        obs.extend([(dose0 + 1, 0)] * int(total - dlts))
    return TrialState(len(n), tuple(obs))


def test_probs_normalise_fuzz():
    rng = np.random.default_rng(77)
    grid = DoseGrid(3, 2)
    oset = standard_orderings(grid)
    skel = indifference_skeleton(6, 0.3)
    for _ in range(100):
        n = rng.integers(0, 5, size=6).astype(float)
        y = np.array([float(rng.integers(0, int(c) + 1)) for c in n])
        probs = posterior_model_probs(_state_from_counts(n, y), oset, skel, PRIOR)
        assert abs(probs.sum() - 1.0) <= 1e-9
        assert np.all(probs >= 0)


def test_single_ordering_degenerate_probability():
    oset = OrderingSet.uniform([(1, 2, 3)])
    state = TrialState(3, ((1, 0), (2, 1)))
    probs = posterior_model_probs(state, oset, indifference_skeleton(3, 0.25), PRIOR)
    assert probs.shape == (1,)
    assert probs[0] == 1.0


def test_plug_in_monotone_along_selected_ordering():
    rng = np.random.default_rng(5150)
    oset = standard_orderings(DoseGrid(2, 3))
    skel = indifference_skeleton(6, 0.35)
    for _ in range(10):
        n = rng.integers(0, 4, size=6).astype(float)
        y = np.array([float(rng.integers(0, int(c) + 1)) for c in n])
        snap = pocrm_estimates(_state_from_counts(n, y), oset, skel, PRIOR)
        seq = oset.orderings[snap.selected_ordering - 1].sequence
        ranked = [snap.estimates[d - 1] for d in seq]
        assert all(b > a for a, b in zip(ranked, ranked[1:]))


def test_averaged_estimates_within_per_ordering_envelope():
    oset = standard_orderings(DoseGrid(3, 2))
    skel = indifference_skeleton(6, 0.4)
    state = _state_from_counts(
        np.array([1.0, 0.0, 1.0, 6.0, 2.0, 1.0]), np.array([0.0, 0.0, 0.0, 3.0, 1.0, 1.0])
    )
    per_ordering = np.array(
        [posterior_dose_expectations(state, o, skel, PRIOR) for o in oset.orderings]
    )
    avg = bma_estimates(state, oset, skel, PRIOR)
    lo = per_ordering.min(axis=0) - 1e-12
    hi = per_ordering.max(axis=0) + 1e-12
    assert np.all(avg.estimates >= lo)
    assert np.all(avg.estimates <= hi)


def test_indifference_skeleton_frozen_values():
    s = indifference_skeleton(6, 0.4)
    assert s.alpha == pytest.approx(
        (
            0.2051892501020688,
            0.29978940628682427,
            0.4,
            0.49810615254736035,
            0.5885444885414786,
            0.668176635089496,
        ),
        rel=1e-12,
    )
    assert s.alpha[2] == 0.4  # target sits exactly at the prior MTD position

    s = indifference_skeleton(4, 0.25)
    assert s.alpha == pytest.approx(
        (0.15674102114263633, 0.25, 0.3545004276151119, 0.4603431110853069), rel=1e-12
    )

    s = indifference_skeleton(16, 0.3)
    assert s.alpha[7] == 0.3
    assert all(b > a for a, b in zip(s.alpha, s.alpha[1:]))
    assert 0.0 < s.alpha[0] and s.alpha[-1] < 1.0


def test_skeleton_validation():
    with pytest.raises(ValueError):
        Skeleton((0.3, 0.2))
    with pytest.raises(ValueError):
        Skeleton((0.0, 0.5))
    with pytest.raises(ValueError):
        Skeleton((0.5, 1.0))
    with pytest.raises(ValueError):
        indifference_skeleton(4, 0.3, prior_mtd=9)


def test_snapshot_validation_and_json():
    snap = EstimateSnapshot(
        method="selection",
        estimates=(0.1, 0.4),
        ordering_probs=(0.5, 0.5),
        posterior_means=(0.0, -0.2),
        selected_ordering=1,
        recommended_dose=2,
    )
    doc = snap.to_json_dict()
    assert doc["method"] == "selection"
    assert doc["estimates"] == [0.1, 0.4]
    assert doc["recommended_dose"] == 2
    with pytest.raises(ValueError):
        EstimateSnapshot("selection", (0.1, 1.2), (1.0,), (0.0,))
    with pytest.raises(ValueError):
        EstimateSnapshot("selection", (0.1, 0.2), (0.7, 0.7), (0.0, 0.0))


def test_trial_state_helpers():
    state = TrialState(3)
    state = state.with_cohort(2, (0, 1, 0))
    n, y = state.counts()
    assert n.tolist() == [0.0, 3.0, 0.0]
    assert y.tolist() == [0.0, 1.0, 0.0]
    with pytest.raises(ValueError):
        TrialState(2, ((3, 0),))
    with pytest.raises(ValueError):
        TrialState(2, ((1, 2),))


def test_repeat_evaluation_is_bitwise_stable():
    a = posterior_model_probs(TWO_BY_TWO_STATE, TWO_BY_TWO, TWO_BY_TWO_SKELETON, PRIOR)
    b = posterior_model_probs(TWO_BY_TWO_STATE, TWO_BY_TWO, TWO_BY_TWO_SKELETON, PRIOR)
    assert a.tobytes() == b.tobytes()


def test_oracle_consistency_of_single_ordering_path():
    # the vector path over one ordering equals the scalar reference integral
    n = np.array([1.0, 2.0, 0.0])
    y = np.array([0.0, 1.0, 0.0])
    alpha = (0.1, 0.3, 0.55)
    ml, pm, ex = riemann_ordering(n, y, (2, 1, 3), alpha)
    state = _state_from_counts(n, y)
    ordering = SimpleOrdering((2, 1, 3))
    skel = Skeleton(alpha)
    assert marginal_likelihood(state, ordering, skel, PRIOR) == pytest.approx(ml, rel=1e-8)
    assert posterior_mean_a(state, ordering, skel, PRIOR) == pytest.approx(pm, rel=1e-8)
    assert posterior_dose_expectations(state, ordering, skel, PRIOR) == pytest.approx(
        ex, rel=1e-8
    )
