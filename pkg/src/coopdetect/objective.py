"""Local cost, gradients, proximal steps and combiners for one AP.

The regularized local cost at an AP is

    F(gamma) = ml_cost(gamma) + beta * sparsity_penalty + tau * similarity,

where ``gamma`` is the device state vector (activity indicator times
large-scale gain, one entry per device).  The solver minimizes F with a
forward gradient step on the likelihood term followed by two closed-form
backward steps: a row-norm shrink over the neighbor panel (joint sparsity)
and an elementwise shrink toward one randomly selected neighbor's estimate
(similarity), with running subgradient estimators tying the two together.

All functions are pure; the per-AP state machine lives in ``solver``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .linalg import (
    cholesky_factor,
    downdate_quadforms_batch,
    logdet_from_factor,
    solve_from_factor,
)

ROWNORM_FLOOR = 1e-12  # below this a panel row counts as zero (no shrink term)


@dataclass
class Hyperparams:
    """Solver hyperparameters with their reference defaults.

    ``selection_probs`` is the neighbor-sampling distribution over the
    inclusive neighbor set (own AP last); None means uniform.
    """

    beta: float = 0.038          # sparsity weight
    tau: float = 0.0075          # similarity weight
    theta: float = 1.0 / 0.039   # log-penalty curvature
    eta: float = 0.003           # gradient step size
    rho: float = 500.0           # combiner sharpness
    iota: float = 1.0            # detection threshold multiplier
    num_iters: int = 40          # synchronized rounds
    selection_probs: tuple[float, ...] | None = None


def assemble_covariance(pilots: np.ndarray, gamma: np.ndarray, noise_power: float) -> np.ndarray:
    """Model covariance ``pilots @ diag(gamma) @ pilots^H + noise_power * I``."""
    l = pilots.shape[0]
    return (pilots * gamma) @ pilots.conj().T + noise_power * np.eye(l)


def ml_cost(gamma, pilots, noise_power, sample_cov) -> float:
    """Negative log-likelihood ``ln det(Sigma) + tr(Sigma^-1 SampleCov)``."""
    sigma = assemble_covariance(pilots, np.asarray(gamma, dtype=float), noise_power)
    return ml_cost_given_factor(cholesky_factor(sigma), sample_cov)


def ml_cost_given_factor(low, sample_cov) -> float:
    """Same as :func:`ml_cost` given the Cholesky factor of the model covariance."""
    fit = float(np.real(np.trace(solve_from_factor(low, sample_cov))))
    return logdet_from_factor(low) + fit


def ml_gradient(gamma, pilots, noise_power, sample_cov, cov=None) -> np.ndarray:
    """Coordinate gradient of :func:`ml_cost` at ``gamma``.

    Entry n is  q1/(1 + gamma_n q1) - q2/(1 + gamma_n q1)^2  with (q1, q2)
    the quadratic forms through the inverse of the covariance with device
    n's own contribution removed; all N entries come from one factorization
    (O(L^2 N)).  ``cov`` may carry a precomputed model covariance.
    """
    gamma = np.asarray(gamma, dtype=float)
    if cov is None:
        cov = assemble_covariance(pilots, gamma, noise_power)
    low = cholesky_factor(cov)
    q1, q2 = downdate_quadforms_batch(low, pilots, gamma, sample_cov)
    denom = 1.0 + gamma * q1
    return q1 / denom - q2 / denom**2


def row_norms(panel: np.ndarray) -> np.ndarray:
    """Euclidean norm of each row of the (N, |neighbors|+1) estimate panel."""
    return np.linalg.norm(np.atleast_2d(panel.T).T, axis=1)


def sparsity_penalty(panel: np.ndarray, theta: float) -> float:
    """Log-regularized row-norm penalty; zero iff every row is zero."""
    r = row_norms(panel)
    return float(np.sum(r - np.log1p(theta * r) / theta))


def sparsity_step(gamma, grad, x_agg, panel, beta, tau, eta) -> np.ndarray:
    """Forward step plus the closed-form row-norm shrink.

    With  s = gamma - eta * grad - tau * eta * x_agg  the result is
    ``s_n - eta * beta * s_n / ||panel row n||`` per coordinate; rows with
    norm below ``ROWNORM_FLOOR`` contribute no shrink term.  The output may
    go negative; positivity is restored by the similarity step.
    """
    s = np.asarray(gamma, dtype=float) - eta * np.asarray(grad) - tau * eta * np.asarray(x_agg)
    r = row_norms(panel)
    ratio = np.divide(s, r, out=np.zeros_like(s), where=r >= ROWNORM_FLOOR)
    return s - eta * beta * ratio


def similarity_prox(z, x_sel, anchor, tau_eta) -> tuple[np.ndarray, int]:
    """Elementwise shrink of ``z + tau_eta * x_sel`` toward ``anchor``.

    For v = z + tau_eta * x_sel the update is

        v - min(tau_eta * sign(v - anchor), v)   if v != 0
        0                                        if v == 0

    with sign(0) = 0, so hitting the anchor exactly returns v.  The min
    keeps the result nonnegative for v >= 0; any residual negative entry is
    clamped to zero and counted.  Returns (estimate, clamp count).
    """
    v = np.asarray(z, dtype=float) + tau_eta * np.asarray(x_sel, dtype=float)
    shift = np.minimum(tau_eta * np.sign(v - np.asarray(anchor, dtype=float)), v)
    out = np.where(v == 0.0, 0.0, v - shift)
    negative = out < 0.0
    n_clamped = int(np.count_nonzero(negative))
    if n_clamped:
        out = np.where(negative, 0.0, out)
    return out, n_clamped


def subgradient_local_update(x_old, z, gamma_new, tau_eta) -> np.ndarray:
    """Running estimator of the selected neighbor's similarity subgradient."""
    return np.asarray(x_old) + (np.asarray(z) - np.asarray(gamma_new)) / tau_eta


def subgradient_aggregate_update(x_agg, weight, x_new, x_old) -> np.ndarray:
    """Fold one neighbor's refreshed estimator into the combined one.

    Maintains ``x_agg = sum_l c_l x^l`` exactly while the combiner weights
    stay constant, since only the selected neighbor's term changed.
    """
    return np.asarray(x_agg) + weight * (np.asarray(x_new) - np.asarray(x_old))


def combiner_weights(own_gamma, neighbor_gammas, rho) -> np.ndarray:
    """Adaptive convex weights over [neighbors..., self].

    Each neighbor gets ``(2/k) * sigmoid(-rho * ||own - theirs||_2)`` where
    k is the neighbor count; the remainder goes to self.  Identical
    estimates split the mass evenly over the neighbors; distant estimates
    push all mass back to self.  Always a probability vector with each
    neighbor weight in [0, 1/k].
    """
    neighbor_gammas = np.atleast_2d(np.asarray(neighbor_gammas, dtype=float))
    k = neighbor_gammas.shape[0] if neighbor_gammas.size else 0
    if k == 0:
        return np.array([1.0])
    dists = np.linalg.norm(neighbor_gammas - np.asarray(own_gamma, dtype=float), axis=1)
    w = (2.0 / k) * expit(-rho * dists)
    return np.append(w, 1.0 - float(np.sum(w)))


def stochastic_step_size(weight: float, eta: float, prob: float) -> float:
    """Per-selection step ``weight * eta / prob``; unbiased for eta in expectation."""
    return weight * eta / prob
