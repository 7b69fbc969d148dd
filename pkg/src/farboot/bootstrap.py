"""Residual-based bootstrap for the fitted autoregression.

Pseudo-innovations are drawn uniformly with replacement from the centered
sample residuals, and pseudo-paths are regenerated through the fitted
operator: ``X*_t = Psi_hat(X*_{t-1}) + eps*_t``.  The starting value is
either the zero curve (default: it makes the conditional mean of the
bootstrap sample mean exactly zero) or a copy of the observed ``X_0``.
There is no warm-up inside bootstrap paths; the influence of the starting
value dies off geometrically on its own.

The key subtlety lives in the centering of the lag-1 statistic: in the
bootstrap world the conditional expectation of ``C_hat*`` is
``C_hat Pi_hat_k`` (up to terms of order ``1/n``), not ``C_hat``, because
the fitted operator only acts on the truncated principal subspace.  The
``centered_cs`` field therefore subtracts ``C_hat Pi_hat_k``.

Replication ``b`` draws from its own derived stream, so replications are
order-independent; the engine batches all of them in lockstep for speed,
which reproduces the single-path routine to floating-point roundoff.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .estimation import FarFit
from .hilbert import op_norm
from .process import Sample
from .rng import make_rng

__all__ = [
    "BootstrapConfig",
    "BootstrapStats",
    "UnstableOperatorError",
    "draw_bootstrap_innovations",
    "bootstrap_path",
    "bootstrap_statistics",
]

X0_POLICIES = ("zero", "copy_x0")


class UnstableOperatorError(RuntimeError):
    """Fitted operator norm is not below 1; path regeneration would explode."""


@dataclass(frozen=True)
class BootstrapConfig:
    B: int
    x0_policy: str = "zero"
    seed: int = 0

    def __post_init__(self) -> None:
        if self.B < 1:
            raise ValueError("replication count B must be at least 1")
        if self.x0_policy not in X0_POLICIES:
            raise ValueError(f"x0_policy must be one of {X0_POLICIES}")


@dataclass(frozen=True, eq=False)
class BootstrapStats:
    """Per-replication statistics of the regenerated paths.

    ``means[b]`` is the mean over ``X*_0 .. X*_{n-1}``, ``gammas[b]`` and
    ``cs[b]`` the covariance and lag-1 autocovariance matrices of path
    ``b``.  ``centered_gammas`` subtracts the sample estimate, and
    ``centered_cs`` subtracts its projection-corrected version.
    """

    means: np.ndarray
    gammas: np.ndarray
    cs: np.ndarray
    centered_gammas: np.ndarray
    centered_cs: np.ndarray

    @property
    def B(self) -> int:
        return self.means.shape[0]


def _check_stable(fit: FarFit) -> None:
    nrm = op_norm(fit.psi_hat)
    if not nrm < 1.0:
        raise UnstableOperatorError(
            f"op_norm(psi_hat) = {nrm:.6f} >= 1; refusing to generate explosive "
            "bootstrap paths (no shrinkage is applied)"
        )


def _x0_for(fit: FarFit, policy: str) -> np.ndarray:
    if policy == "zero":
        return np.zeros(fit.dim)
    return fit.x0.copy()


def draw_bootstrap_innovations(fit: FarFit, n: int, rng: np.random.Generator) -> np.ndarray:
    """``n`` i.i.d. uniform draws with replacement from the centered residuals."""
    pool = fit.centered_residuals
    if pool.shape[0] == 0:
        raise ValueError("fit has no residuals to resample")
    idx = rng.integers(0, pool.shape[0], size=n)
    return pool[idx]


def bootstrap_path(
    fit: FarFit,
    n: int,
    cfg: BootstrapConfig,
    rng: np.random.Generator,
    innovations: Optional[np.ndarray] = None,
) -> Sample:
    """Regenerate one pseudo-path ``X*_0 .. X*_n`` through the fitted operator.

    ``innovations`` is a test hook overriding the resampled draws.
    """
    _check_stable(fit)
    if innovations is None:
        eps_star = draw_bootstrap_innovations(fit, n, rng)
    else:
        eps_star = np.asarray(innovations, dtype=float)
        if eps_star.shape != (n, fit.dim):
            raise ValueError(f"innovation override must have shape {(n, fit.dim)}")
    psi = fit.psi_hat.mat
    xs = np.empty((n + 1, fit.dim))
    xs[0] = _x0_for(fit, cfg.x0_policy)
    for t in range(n):
        xs[t + 1] = psi @ xs[t] + eps_star[t]
    return Sample(xs=xs, seed=cfg.seed, model_tag="bootstrap", eps=eps_star)


def bootstrap_statistics(fit: FarFit, cfg: BootstrapConfig) -> BootstrapStats:
    """Generate ``cfg.B`` independent pseudo-paths and collect their statistics.

    Replication ``b`` uses the stream derived from ``(cfg.seed, b)``; the
    result is bit-identical for identical ``(fit, cfg)`` regardless of how
    the replications are scheduled.
    """
    _check_stable(fit)
    n, d, B = fit.n, fit.dim, cfg.B
    pool = fit.centered_residuals
    idx = np.empty((B, n), dtype=np.int64)
    for b in range(B):
        idx[b] = make_rng(cfg.seed, b).integers(0, n, size=n)
    eps_star = pool[idx]  # (B, n, d)

    x = np.tile(_x0_for(fit, cfg.x0_policy), (B, 1))
    mean_acc = np.zeros((B, d))
    gamma_acc = np.zeros((B, d, d))
    c_acc = np.zeros((B, d, d))
    psi_t = fit.psi_hat.mat.T
    for t in range(n):
        mean_acc += x
        gamma_acc += np.einsum("bi,bj->bij", x, x)
        x_next = x @ psi_t + eps_star[:, t]
        c_acc += np.einsum("bi,bj->bij", x_next, x)
        x = x_next

    means = mean_acc / n
    gammas = gamma_acc / n
    cs = c_acc / n
    centered_gammas = gammas - fit.gamma_hat.mat
    centered_cs = cs - fit.c_hat.mat @ fit.pi_hat_k.mat
    for arr in (means, gammas, cs, centered_gammas, centered_cs):
        arr.flags.writeable = False
    return BootstrapStats(
        means=means,
        gammas=gammas,
        cs=cs,
        centered_gammas=centered_gammas,
        centered_cs=centered_cs,
    )
