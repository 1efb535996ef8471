"""Brute-force reference integrator used by the test suite.

Deliberately naive and independent of the package's quadrature: a plain
left-endpoint Riemann sum on an evenly spaced grid over
[-12, 12] * sqrt(variance / 1.34), evaluating the prior-times-likelihood
product in linear space, one ordering at a time.  Only the chunking is a
concession to memory; the arithmetic is the textbook formula.
"""

from __future__ import annotations

import math

import numpy as np

DEFAULT_POINTS = 10**6
_CHUNK = 1 << 16


def riemann_ordering(n, y, sequence, alpha, mean=0.0, variance=1.34, n_points=DEFAULT_POINTS):
    """Marginal likelihood, posterior mean of a, and per-dose posterior E[psi].

    ``sequence`` lists 1-based dose indices least-to-most toxic; ``alpha`` is the
    skeleton by rank.  Returns (marginal, post_mean, expectations[K]).
    """
    n = np.asarray(n, dtype=float)
    y = np.asarray(y, dtype=float)
    k = len(sequence)
    # skeleton value assigned to each dose under this ordering
    alpha_dose = np.empty(k)
    for rank0, dose in enumerate(sequence):
        alpha_dose[dose - 1] = alpha[rank0]
    half = 12.0 * math.sqrt(variance / 1.34)
    lo, hi = mean - half, mean + half
    h = (hi - lo) / n_points
    sd = math.sqrt(variance)

    total_ml = 0.0
    total_a = 0.0
    total_psi = np.zeros(k)
    for start in range(0, n_points, _CHUNK):
        idx = np.arange(start, min(start + _CHUNK, n_points))
        a = lo + idx * h  # left endpoints
        prior = np.exp(-0.5 * ((a - mean) / sd) ** 2) / (sd * math.sqrt(2.0 * math.pi))
        psi = alpha_dose[None, :] ** np.exp(a)[:, None]
        lik = np.prod(psi**y[None, :] * (1.0 - psi) ** (n - y)[None, :], axis=1)
        weight = prior * lik * h
        total_ml += weight.sum()
        total_a += (a * weight).sum()
        total_psi += weight @ psi
    return total_ml, total_a / total_ml, total_psi / total_ml


def riemann_summary(n, y, sequences, alpha, prior_weights=None, mean=0.0, variance=1.34, n_points=DEFAULT_POINTS):
    """Everything both estimators need, for a whole ordering set.

    Returns a dict with marginals, ordering probabilities, posterior means,
    per-ordering expectations, the modal ordering (1-based, first of ties),
    plug-in estimates at its posterior mean, and the averaged estimates.
    """
    m = len(sequences)
    if prior_weights is None:
        prior_weights = [1.0 / m] * m
    marginals = np.empty(m)
    post_means = np.empty(m)
    expectations = np.empty((m, len(alpha)))
    for i, seq in enumerate(sequences):
        marginals[i], post_means[i], expectations[i] = riemann_ordering(
            n, y, seq, alpha, mean=mean, variance=variance, n_points=n_points
        )
    unnorm = np.asarray(prior_weights) * marginals
    probs = unnorm / unnorm.sum()
    best = int(np.argmax(probs))
    power = math.exp(post_means[best])
    seq = sequences[best]
    plug_in = np.empty(len(alpha))
    for rank0, dose in enumerate(seq):
        plug_in[dose - 1] = alpha[rank0] ** power
    averaged = probs @ expectations
    return {
        "marginals": marginals,
        "probs": probs,
        "post_means": post_means,
        "expectations": expectations,
        "selected": best + 1,
        "plug_in": plug_in,
        "averaged": averaged,
    }
