"""Working model, per-ordering posteriors, and the two estimators.

Each candidate ordering m carries a one-parameter curve for every dose,
psi_m(d, a) = alpha^{exp(a)} with alpha the skeleton value at d's rank under m.
The exp transform keeps the curve inside (0, 1) for any real a, so a normal
prior on a is coherent.  DLT outcomes are Bernoulli in psi, and all posterior
quantities are deterministic quadratures over a: a composite midpoint rule on
mean +/- 12 sd, starting at 2048 nodes and doubling until every monitored
output moves by less than 1e-9, capped at 2**17 nodes.  Hitting the cap raises
:class:`QuadratureError` rather than silently degrading.

Two estimators share those posteriors.  Ordering *selection* picks the modal
ordering m* and plugs its posterior mean of a into the curve.  Model
*averaging* mixes the per-ordering posterior expectations of psi with the
posterior ordering weights.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import NamedTuple, Sequence

import numpy as np

from .orderings import OrderingSet, SimpleOrdering

__all__ = [
    "QuadratureError",
    "Skeleton",
    "PriorSpec",
    "TrialState",
    "EstimateSnapshot",
    "indifference_skeleton",
    "working_model",
    "log_likelihood",
    "marginal_likelihood",
    "posterior_model_probs",
    "posterior_mean_a",
    "posterior_dose_expectations",
    "pocrm_estimates",
    "bma_estimates",
]

PROB_SUM_TOL = 1e-9

_START_NODES = 2048
_MAX_NODES = 1 << 17
_REL_TOL = 1e-9
_HALF_WIDTH_SDS = 12.0


class QuadratureError(RuntimeError):
    """Integration grid hit its refinement cap without converging."""


@dataclass(frozen=True)
class Skeleton:
    """Prior DLT-probability guesses by toxicity rank, strictly increasing in (0, 1)."""

    alpha: tuple[float, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "alpha", tuple(float(a) for a in self.alpha))
        if not self.alpha:
            raise ValueError("skeleton is empty")
        if any(not (0.0 < a < 1.0) for a in self.alpha):
            raise ValueError("skeleton values must lie strictly inside (0, 1)")
        if any(b <= a for a, b in zip(self.alpha, self.alpha[1:])):
            raise ValueError("skeleton values must be strictly increasing")

    def __len__(self) -> int:
        return len(self.alpha)

    def value_for(self, ordering: SimpleOrdering, dose: int) -> float:
        """Skeleton value assigned to a dose: alpha at the dose's rank under the ordering."""
        return self.alpha[ordering.position(dose) - 1]


def indifference_skeleton(
    n_doses: int,
    theta: float,
    halfwidth: float = 0.05,
    prior_mtd: int | None = None,
) -> Skeleton:
    """Skeleton from the indifference-interval construction for the power model.

    Neighbouring skeleton values are spaced so the model is indifferent within
    ``theta +/- halfwidth`` around each dose; the prior guess for the target
    dose sits at rank ``prior_mtd`` (default: the lower median rank).
    """
    if not (0.0 < theta < 1.0):
        raise ValueError("theta must be in (0, 1)")
    if not (0.0 < halfwidth < min(theta, 1.0 - theta)):
        raise ValueError("halfwidth must keep theta +/- halfwidth inside (0, 1)")
    nu = (n_doses + 1) // 2 if prior_mtd is None else prior_mtd
    if not (1 <= nu <= n_doses):
        raise ValueError("prior_mtd outside 1..n_doses")
    vals = np.empty(n_doses)
    vals[nu - 1] = theta
    for k in range(nu - 1, 0, -1):
        b = math.log(math.log(theta + halfwidth) / math.log(vals[k]))
        vals[k - 1] = math.exp(math.log(theta - halfwidth) / math.exp(b))
    for k in range(nu, n_doses):
        b = math.log(math.log(theta - halfwidth) / math.log(vals[k - 1]))
        vals[k] = math.exp(math.log(theta + halfwidth) / math.exp(b))
    return Skeleton(tuple(vals))


@dataclass(frozen=True)
class PriorSpec:
    """Normal prior on the curve parameter a."""

    mean: float = 0.0
    variance: float = 1.34

    def __post_init__(self) -> None:
        if not (self.variance > 0.0) or not math.isfinite(self.variance):
            raise ValueError("prior variance must be positive and finite")
        if not math.isfinite(self.mean):
            raise ValueError("prior mean must be finite")


@dataclass(frozen=True)
class TrialState:
    """Ordered record of (dose, DLT indicator) observations on a K-dose grid."""

    n_doses: int
    observations: tuple[tuple[int, int], ...] = ()

    def __post_init__(self) -> None:
        obs = tuple((int(d), int(y)) for d, y in self.observations)
        object.__setattr__(self, "observations", obs)
        for d, y in obs:
            if not (1 <= d <= self.n_doses):
                raise ValueError(f"dose {d} outside 1..{self.n_doses}")
            if y not in (0, 1):
                raise ValueError(f"DLT indicator must be 0 or 1, got {y}")

    @property
    def n_patients(self) -> int:
        return len(self.observations)

    def with_cohort(self, dose: int, outcomes: Sequence[int]) -> "TrialState":
        extra = tuple((dose, int(bool(y))) for y in outcomes)
        return TrialState(self.n_doses, self.observations + extra)

    def counts(self) -> tuple[np.ndarray, np.ndarray]:
        """(n, y): patients treated and DLTs seen per dose, 0-based arrays."""
        n = np.zeros(self.n_doses)
        y = np.zeros(self.n_doses)
        for d, out in self.observations:
            n[d - 1] += 1
            y[d - 1] += out
        return n, y


@dataclass(frozen=True)
class EstimateSnapshot:
    """Everything one estimation step produces.

    ``ordering_probs`` are the posterior ordering weights (sum to one),
    ``posterior_means`` the per-ordering posterior means of a, and
    ``estimates`` the per-dose DLT-probability estimates.  ``selected_ordering``
    is the 1-based modal ordering (selection method only).  ``recommended_dose``
    is attached by the trial engine; bare estimator calls leave it None.
    """

    method: str  # "selection" | "averaging"
    estimates: tuple[float, ...]
    ordering_probs: tuple[float, ...]
    posterior_means: tuple[float, ...]
    selected_ordering: int | None = None
    recommended_dose: int | None = None

    def __post_init__(self) -> None:
        if self.method not in ("selection", "averaging"):
            raise ValueError(f"unknown method {self.method!r}")
        object.__setattr__(self, "estimates", tuple(float(v) for v in self.estimates))
        object.__setattr__(self, "ordering_probs", tuple(float(v) for v in self.ordering_probs))
        object.__setattr__(self, "posterior_means", tuple(float(v) for v in self.posterior_means))
        if any(not (0.0 < e < 1.0) for e in self.estimates):
            raise ValueError("estimates must lie strictly inside (0, 1)")
        total = sum(self.ordering_probs)
        if abs(total - 1.0) > PROB_SUM_TOL:
            raise ValueError(f"ordering probabilities sum to {total!r}")

    def to_json_dict(self) -> dict:
        return {
            "method": self.method,
            "estimates": list(self.estimates),
            "ordering_probs": list(self.ordering_probs),
            "posterior_means": list(self.posterior_means),
            "selected_ordering": self.selected_ordering,
            "recommended_dose": self.recommended_dose,
        }


# ----------------------------------------------------------------------------
# Working model and likelihood
# ----------------------------------------------------------------------------

def working_model(alpha_k: float, a: float) -> float:
    """DLT probability alpha^{exp(a)}; monotone in alpha, inside (0,1) for real a."""
    if not (0.0 < alpha_k < 1.0):
        raise ValueError("alpha must lie strictly inside (0, 1)")
    return alpha_k ** math.exp(a)


def log_likelihood(state: TrialState, ordering: SimpleOrdering, skeleton: Skeleton, a: float) -> float:
    """Bernoulli log-likelihood of the observations under one ordering's curve at a."""
    _check_dims(state.n_doses, ordering, skeleton)
    total = 0.0
    power = math.exp(a)
    for dose, y in state.observations:
        alpha = skeleton.alpha[ordering.position(dose) - 1]
        log_psi = power * math.log(alpha)
        total += log_psi if y else _log1m_exp(log_psi)
    return total


def _log1m_exp(log_p: float) -> float:
    # log(1 - e^x) for x < 0, stable at both ends.
    if log_p > -1e-8:
        return math.log(-math.expm1(min(log_p, -5e-324)))
    return math.log1p(-math.exp(log_p))


def _check_dims(n_doses: int, ordering: SimpleOrdering, skeleton: Skeleton) -> None:
    if len(ordering.sequence) != n_doses:
        raise ValueError("ordering does not cover the trial's doses")
    if len(skeleton) != n_doses:
        raise ValueError("skeleton length does not match the number of doses")


# ----------------------------------------------------------------------------
# Quadrature tables
# ----------------------------------------------------------------------------

class _NodeTable(NamedTuple):
    log_prior_w: np.ndarray  # log prior density + log step, shape (N,)
    log_terms: np.ndarray    # [log psi | log(1 - psi)] by rank, shape (2K, N)
    moments: np.ndarray      # column 0 the nodes a, columns 1..K psi by rank, shape (N, K+1)


@lru_cache(maxsize=64)
def _node_table(mean: float, variance: float, alpha: tuple[float, ...], n_nodes: int) -> _NodeTable:
    sd = math.sqrt(variance)
    lo = mean - _HALF_WIDTH_SDS * sd
    step = 2.0 * _HALF_WIDTH_SDS * sd / n_nodes
    a = lo + step * (np.arange(n_nodes) + 0.5)
    z = (a - mean) / sd
    log_prior_w = -0.5 * z * z - math.log(sd) - 0.5 * math.log(2.0 * math.pi) + math.log(step)
    log_alpha = np.log(np.asarray(alpha))
    log_psi = np.exp(a)[:, None] * log_alpha[None, :]
    # keep log_psi strictly negative so log(1 - psi) stays finite at extreme nodes
    np.minimum(log_psi, -np.finfo(float).tiny, out=log_psi)
    psi = np.exp(log_psi)
    log_1m_psi = np.log(-np.expm1(log_psi))
    log_terms = np.ascontiguousarray(np.concatenate([log_psi, log_1m_psi], axis=1).T)
    moments = np.ascontiguousarray(np.concatenate([a[:, None], psi], axis=1))
    return _NodeTable(log_prior_w, log_terms, moments)


class _PosteriorTables(NamedTuple):
    log_marginals: np.ndarray  # shape (M,)
    post_mean_a: np.ndarray    # shape (M,)
    expect_rank: np.ndarray    # posterior E[psi] by rank, shape (M, K)


@lru_cache(maxsize=256)
def _rank_perm(orderings: OrderingSet) -> np.ndarray:
    # perm[m, r] = 0-based dose index at rank r under ordering m
    return np.asarray([[d - 1 for d in o.sequence] for o in orderings.orderings])


def _tables_at(
    n: np.ndarray,
    y: np.ndarray,
    perm: np.ndarray,
    tab: _NodeTable,
) -> _PosteriorTables:
    # Rank-space response counts: row m stacks y then n - y in ordering m's rank order.
    counts = np.concatenate([y[perm], (n - y)[perm]], axis=1)  # (M, 2K)
    lw = counts @ tab.log_terms  # (M, N) log-likelihood per ordering and node
    lw += tab.log_prior_w[None, :]
    peak = lw.max(axis=1)
    np.subtract(lw, peak[:, None], out=lw)
    np.exp(lw, out=lw)  # unnormalised posterior node weights
    norm = lw.sum(axis=1)
    log_marginals = peak + np.log(norm)
    mom = lw @ tab.moments  # (M, K+1): a-moment then psi moments by rank
    mom /= norm[:, None]
    return _PosteriorTables(log_marginals, np.ascontiguousarray(mom[:, 0]), mom[:, 1:])


def _dose_expectations(tables: _PosteriorTables, perm: np.ndarray) -> np.ndarray:
    """Map rank-space expectations to dose order, per ordering: shape (M, K)."""
    m_count, k_count = perm.shape
    out = np.empty((m_count, k_count))
    for m in range(m_count):
        out[m, perm[m]] = tables.expect_rank[m]
    return out


def _converged(prev: _PosteriorTables, cur: _PosteriorTables) -> bool:
    if np.any(np.abs(cur.log_marginals - prev.log_marginals) > _REL_TOL):
        return False
    scale = np.maximum(1.0, np.abs(cur.post_mean_a))
    if np.any(np.abs(cur.post_mean_a - prev.post_mean_a) > _REL_TOL * scale):
        return False
    if np.any(np.abs(cur.expect_rank - prev.expect_rank) > _REL_TOL):
        return False
    return True


def _posterior_tables(
    n: np.ndarray,
    y: np.ndarray,
    orderings: OrderingSet,
    skeleton: Skeleton,
    prior: PriorSpec,
) -> _PosteriorTables:
    return _posterior_tables_cached(
        tuple(float(v) for v in n), tuple(float(v) for v in y), orderings, skeleton, prior
    )


@lru_cache(maxsize=4096)
def _posterior_tables_cached(
    n_key: tuple[float, ...],
    y_key: tuple[float, ...],
    orderings: OrderingSet,
    skeleton: Skeleton,
    prior: PriorSpec,
) -> _PosteriorTables:
    """Doubling-protocol quadrature over a for every ordering at once.

    Memoised on the per-dose counts: simulated trials revisit early-trial
    states constantly and the tables are pure functions of the counts.
    """
    n = np.asarray(n_key)
    y = np.asarray(y_key)
    perm = _rank_perm(orderings)
    nodes = _START_NODES
    prev = _tables_at(n, y, perm, _node_table(prior.mean, prior.variance, skeleton.alpha, nodes))
    while True:
        nodes *= 2
        if nodes > _MAX_NODES:
            raise QuadratureError(
                f"quadrature did not converge within {_MAX_NODES} nodes "
                f"(relative tolerance {_REL_TOL})"
            )
        cur = _tables_at(n, y, perm, _node_table(prior.mean, prior.variance, skeleton.alpha, nodes))
        if _converged(prev, cur):
            return cur
        prev = cur


def _counts_of(state: TrialState) -> tuple[np.ndarray, np.ndarray]:
    return state.counts()


def _single(ordering: SimpleOrdering) -> OrderingSet:
    return OrderingSet((ordering,), (1.0,))


# ----------------------------------------------------------------------------
# Public posterior quantities
# ----------------------------------------------------------------------------

def marginal_likelihood(
    state: TrialState, ordering: SimpleOrdering, skeleton: Skeleton, prior: PriorSpec
) -> float:
    """Likelihood integrated over the prior on a; 1.0 for an empty state."""
    _check_dims(state.n_doses, ordering, skeleton)
    n, y = _counts_of(state)
    tables = _posterior_tables(n, y, _single(ordering), skeleton, prior)
    return float(math.exp(tables.log_marginals[0]))


def posterior_mean_a(
    state: TrialState, ordering: SimpleOrdering, skeleton: Skeleton, prior: PriorSpec
) -> float:
    """Posterior mean of the curve parameter under one ordering."""
    _check_dims(state.n_doses, ordering, skeleton)
    n, y = _counts_of(state)
    tables = _posterior_tables(n, y, _single(ordering), skeleton, prior)
    return float(tables.post_mean_a[0])


def posterior_dose_expectations(
    state: TrialState, ordering: SimpleOrdering, skeleton: Skeleton, prior: PriorSpec
) -> np.ndarray:
    """Posterior expectation of psi(d, a) per dose under one ordering."""
    _check_dims(state.n_doses, ordering, skeleton)
    n, y = _counts_of(state)
    oset = _single(ordering)
    tables = _posterior_tables(n, y, oset, skeleton, prior)
    return _dose_expectations(tables, _rank_perm(oset))[0]


def posterior_model_probs(
    state: TrialState, orderings: OrderingSet, skeleton: Skeleton, prior: PriorSpec
) -> np.ndarray:
    """Posterior weight of each candidate ordering given the observations."""
    for o in orderings.orderings:
        _check_dims(state.n_doses, o, skeleton)
    n, y = _counts_of(state)
    tables = _posterior_tables(n, y, orderings, skeleton, prior)
    return _ordering_probs(tables.log_marginals, orderings.prior_weights)


def _ordering_probs(log_marginals: np.ndarray, prior_weights: Sequence[float]) -> np.ndarray:
    log_w = np.log(np.asarray(prior_weights)) + log_marginals
    log_w -= log_w.max()
    w = np.exp(log_w)
    return w / w.sum()


def pocrm_estimates(
    state: TrialState, orderings: OrderingSet, skeleton: Skeleton, prior: PriorSpec
) -> EstimateSnapshot:
    """Ordering-selection estimates: modal ordering, plug-in at its posterior mean.

    Ties in the posterior ordering weights go to the lowest ordering index.
    """
    for o in orderings.orderings:
        _check_dims(state.n_doses, o, skeleton)
    n, y = _counts_of(state)
    tables = _posterior_tables(n, y, orderings, skeleton, prior)
    probs = _ordering_probs(tables.log_marginals, orderings.prior_weights)
    best = int(np.argmax(probs))  # argmax takes the first of equal maxima
    a_hat = tables.post_mean_a[best]
    power = math.exp(a_hat)
    positions = orderings.orderings[best].positions
    alpha = skeleton.alpha
    estimates = tuple(alpha[positions[d] - 1] ** power for d in range(state.n_doses))
    return EstimateSnapshot(
        method="selection",
        estimates=estimates,
        ordering_probs=tuple(probs),
        posterior_means=tuple(tables.post_mean_a),
        selected_ordering=best + 1,
    )


def bma_estimates(
    state: TrialState, orderings: OrderingSet, skeleton: Skeleton, prior: PriorSpec
) -> EstimateSnapshot:
    """Model-averaging estimates: posterior-weight mixture of per-ordering expectations."""
    for o in orderings.orderings:
        _check_dims(state.n_doses, o, skeleton)
    n, y = _counts_of(state)
    tables = _posterior_tables(n, y, orderings, skeleton, prior)
    probs = _ordering_probs(tables.log_marginals, orderings.prior_weights)
    estimates = probs @ _dose_expectations(tables, _rank_perm(orderings))
    return EstimateSnapshot(
        method="averaging",
        estimates=tuple(estimates),
        ordering_probs=tuple(probs),
        posterior_means=tuple(tables.post_mean_a),
        selected_ordering=None,
    )
