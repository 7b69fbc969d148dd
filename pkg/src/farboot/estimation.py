"""Sample-based estimation of the autoregression.

The pipeline follows the classical principal-component route: estimate the
covariance operator ``Gamma_hat = (1/n) sum X_j (x) X_j`` and the lag-1
autocovariance ``C_hat = (1/n) sum X_j (x) X_{j+1}`` (the last observation
enters only ``C_hat``, and the curves are not centered since the process
mean is zero), decompose ``Gamma_hat``, invert it on the span of the top
``k`` eigenfunctions, and set ``Psi_hat = C_hat Gamma_hat_dagger``.

Inverting ``Gamma_hat`` is ill conditioned: its inverse is unbounded in the
limit, which is exactly why the truncation level ``k`` exists and why it
must grow slowly with ``n``.  The truncation rules implemented here cap
``k`` at ``(1/(8 log(1/a)) - delta) log n`` when the eigengaps decay like
``a**j`` and at ``n**(1/(4(2a+1)) - delta)`` when they decay like
``j**(-a)``; these are the stricter variants that remain admissible for the
bootstrap comparisons, so one rule serves estimation and resampling alike.

Residuals are ``eps_hat_j = X_j - Psi_hat(X_{j-1})`` for ``j = 1..n``, and
``eps_tilde_j`` subtracts their mean so the resampling pool sums to zero.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np

from .hilbert import FuncVec, HsOp
from .process import Sample

__all__ = [
    "EigenSystem",
    "FarFit",
    "LogRule",
    "PolyRule",
    "FixedRule",
    "KRule",
    "parse_k_rule",
    "format_k_rule",
    "TruncationError",
    "sample_mean",
    "cov_est",
    "autocov_est",
    "eigensystem",
    "select_k",
    "reg_inverse",
    "projection",
    "estimate_psi",
    "residuals",
    "s_n_operator",
    "fit",
]

# Truncation levels whose eigenvalue falls below this fraction of the top
# eigenvalue are rejected instead of inverted: a silent blowup of the
# regularized inverse is worse than an error.
LAMBDA_FLOOR_RATIO = 1e-12

# Adjacent empirical eigenvalues closer than this fraction of the top one
# flag the fit as effectively degenerate (multiplicity-1 spirit violated).
DEGENERATE_GAP_RATIO = 1e-10


class TruncationError(ValueError):
    """Requested truncation level is ill conditioned for this spectrum."""


@dataclass(frozen=True, eq=False)
class EigenSystem:
    """Descending eigenvalues and sign-fixed orthonormal eigenvectors.

    ``vectors`` holds the eigenvectors as columns.  Signs follow a data-only
    convention (largest-magnitude coefficient positive, ties to the lowest
    index) so that fits are deterministic without knowledge of any true
    eigenvectors.  ``gaps[j]`` is the smaller of the spacings to the
    neighbouring eigenvalues, with one-sided spacings at the ends.
    """

    lambdas: np.ndarray
    vectors: np.ndarray
    gaps: np.ndarray
    degenerate: bool

    def vector(self, j: int) -> FuncVec:
        """Eigenvector ``j`` (0-based) as a curve."""
        return FuncVec(self.vectors[:, j])

    @property
    def dim(self) -> int:
        return self.lambdas.shape[0]

    def positive_count(self, floor_ratio: float = LAMBDA_FLOOR_RATIO) -> int:
        """Number of eigenvalues safely above the inversion floor."""
        top = self.lambdas[0]
        if top <= 0:
            return 0
        return int(np.sum(self.lambdas > floor_ratio * top))


@dataclass(frozen=True)
class LogRule:
    """Logarithmic truncation growth for exponentially decaying eigengaps."""

    a: float
    delta: float = 0.05

    def __post_init__(self) -> None:
        if not 0 < self.a < 1:
            raise ValueError("a must lie in (0, 1)")
        coeff = 1.0 / (8.0 * math.log(1.0 / self.a))
        if not 0 < self.delta < coeff:
            raise ValueError(f"delta must lie in (0, {coeff}) for a = {self.a}")

    def bound(self, n: int) -> int:
        coeff = 1.0 / (8.0 * math.log(1.0 / self.a)) - self.delta
        return math.floor(coeff * math.log(n))


@dataclass(frozen=True)
class PolyRule:
    """Power-law truncation growth for polynomially decaying eigengaps."""

    a: float
    delta: float = 0.01

    def __post_init__(self) -> None:
        if not self.a > 1:
            raise ValueError("a must exceed 1")
        expo = 1.0 / (4.0 * (2.0 * self.a + 1.0))
        if not 0 < self.delta < expo:
            raise ValueError(f"delta must lie in (0, {expo}) for a = {self.a}")

    def bound(self, n: int) -> int:
        expo = 1.0 / (4.0 * (2.0 * self.a + 1.0)) - self.delta
        return math.floor(n**expo)


@dataclass(frozen=True)
class FixedRule:
    """Pass a constant truncation level through (still clamped to the spectrum)."""

    k: int

    def __post_init__(self) -> None:
        if self.k < 1:
            raise ValueError("k must be at least 1")

    def bound(self, n: int) -> int:
        return self.k


KRule = Union[LogRule, PolyRule, FixedRule]


def parse_k_rule(text: str) -> KRule:
    """Parse ``fixed:K``, ``log:A:DELTA`` or ``poly:A:DELTA``."""
    parts = text.split(":")
    try:
        if parts[0] == "fixed" and len(parts) == 2:
            return FixedRule(k=int(parts[1]))
        if parts[0] == "log" and len(parts) in (2, 3):
            return LogRule(*map(float, parts[1:]))
        if parts[0] == "poly" and len(parts) in (2, 3):
            return PolyRule(*map(float, parts[1:]))
    except (ValueError, TypeError) as exc:
        raise ValueError(f"bad truncation rule {text!r}: {exc}") from exc
    raise ValueError(f"bad truncation rule {text!r}")


def format_k_rule(rule: KRule) -> str:
    if isinstance(rule, FixedRule):
        return f"fixed:{rule.k}"
    if isinstance(rule, LogRule):
        return f"log:{rule.a}:{rule.delta}"
    return f"poly:{rule.a}:{rule.delta}"


@dataclass(frozen=True, eq=False)
class FarFit:
    """Everything the estimation pipeline produces for one sample.

    ``raw_residuals`` holds ``eps_hat_1 .. eps_hat_n`` row-wise and
    ``centered_residuals`` their mean-centered versions (summing to the zero
    curve).  ``x0`` and ``xn`` are kept for bootstrap initialisation and
    edge-term diagnostics.
    """

    gamma_hat: HsOp
    c_hat: HsOp
    eigen: EigenSystem
    k: int
    gamma_dagger: HsOp
    pi_hat_k: HsOp
    psi_hat: HsOp
    raw_residuals: np.ndarray
    centered_residuals: np.ndarray
    sample_mean: FuncVec
    x0: np.ndarray
    xn: np.ndarray

    @property
    def n(self) -> int:
        return self.raw_residuals.shape[0]

    @property
    def dim(self) -> int:
        return self.gamma_hat.dim

    @property
    def degenerate(self) -> bool:
        return self.eigen.degenerate


def sample_mean(s: Sample) -> FuncVec:
    """Mean of ``X_0 .. X_{n-1}`` (the last observation is excluded)."""
    return FuncVec(s.xs[: s.n].mean(axis=0))


def cov_est(s: Sample) -> HsOp:
    """Empirical covariance operator ``(1/n) sum_{j<n} X_j (x) X_j``."""
    x = s.xs[: s.n]
    g = (x.T @ x) / s.n
    return HsOp(0.5 * (g + g.T))


def autocov_est(s: Sample) -> HsOp:
    """Empirical lag-1 autocovariance ``(1/n) sum_{j<n} X_j (x) X_{j+1}``.

    With the rank-one orientation used throughout, the matrix is
    ``(1/n) sum X_{j+1} X_j^T``; this is the only estimator that consumes
    the final observation.
    """
    return HsOp((s.xs[1:].T @ s.xs[: s.n]) / s.n)


def _fix_signs(vectors: np.ndarray) -> np.ndarray:
    """Flip each column so its largest-magnitude entry is positive."""
    out = vectors.copy()
    for j in range(out.shape[1]):
        col = out[:, j]
        lead = int(np.argmax(np.abs(col)))
        if col[lead] < 0:
            out[:, j] = -col
    return out


def eigensystem(gamma_hat: HsOp) -> EigenSystem:
    """Full descending eigendecomposition of a (symmetrised) covariance.

    The input is symmetrised as ``(A + A^T)/2`` to absorb floating-point
    asymmetry before calling the symmetric eigensolver.  Zero eigenvalues
    are reported, not rejected; near-degenerate spacings only set a flag.
    """
    sym = 0.5 * (gamma_hat.mat + gamma_hat.mat.T)
    lam, vec = np.linalg.eigh(sym)
    order = np.argsort(lam)[::-1]
    lam = lam[order]
    vec = _fix_signs(vec[:, order])
    d = lam.shape[0]
    if d == 1:
        gaps = np.array([np.inf])
    else:
        spac = lam[:-1] - lam[1:]
        gaps = np.empty(d)
        gaps[0] = spac[0]
        gaps[-1] = spac[-1]
        for j in range(1, d - 1):
            gaps[j] = min(spac[j - 1], spac[j])
    top = max(lam[0], 0.0)
    degenerate = bool(d > 1 and np.min(lam[:-1] - lam[1:]) < DEGENERATE_GAP_RATIO * top)
    lam.flags.writeable = False
    vec.flags.writeable = False
    gaps.flags.writeable = False
    return EigenSystem(lambdas=lam, vectors=vec, gaps=gaps, degenerate=degenerate)


def select_k(eigen: EigenSystem, n: int, rule: KRule) -> int:
    """Truncation level from the rule's bound, clamped to the usable spectrum."""
    available = eigen.positive_count()
    if available == 0:
        raise TruncationError("no strictly positive eigenvalue to invert")
    return max(1, min(rule.bound(n), available))


def reg_inverse(eigen: EigenSystem, k: int) -> HsOp:
    """Spectrally truncated inverse ``sum_{j<=k} (1/lam_j) v_j (x) v_j``.

    Symmetric, invariant under eigenvector sign flips, and refused with
    ``TruncationError`` when ``lam_k`` sits below the inversion floor.
    """
    _check_truncation(eigen, k)
    v = eigen.vectors[:, :k]
    m = (v / eigen.lambdas[:k]) @ v.T
    return HsOp(0.5 * (m + m.T))


def projection(eigen: EigenSystem, k: int) -> HsOp:
    """Orthogonal projection onto the span of the top ``k`` eigenvectors."""
    _check_truncation(eigen, k)
    v = eigen.vectors[:, :k]
    p = v @ v.T
    return HsOp(0.5 * (p + p.T))


def _check_truncation(eigen: EigenSystem, k: int) -> None:
    if not 1 <= k <= eigen.dim:
        raise ValueError(f"truncation level {k} out of range [1, {eigen.dim}]")
    top = eigen.lambdas[0]
    if top <= 0 or eigen.lambdas[k - 1] <= LAMBDA_FLOOR_RATIO * top:
        raise TruncationError(
            f"eigenvalue {k} is {eigen.lambdas[k - 1]:.3e}, below the inversion floor "
            f"{LAMBDA_FLOOR_RATIO:.0e} * {top:.3e}"
        )


def estimate_psi(c_hat: HsOp, gamma_dagger: HsOp) -> HsOp:
    """Autoregression estimate ``Psi_hat = C_hat Gamma_hat_dagger``."""
    return c_hat @ gamma_dagger


def residuals(s: Sample, psi_hat: HsOp) -> tuple[np.ndarray, np.ndarray]:
    """Raw and mean-centered one-step residuals, one per transition."""
    raw = s.xs[1:] - s.xs[: s.n] @ psi_hat.mat.T
    centered = raw - raw.mean(axis=0)
    return raw, centered


def s_n_operator(s: Sample, true_psi: HsOp, true_eps: np.ndarray) -> HsOp:
    """Score-type operator ``sum_t X_{t-1} (x) eps_t`` from recorded innovations.

    A simulation-only diagnostic: it equals ``n (C_hat - Psi Gamma_hat)``
    and links the estimation error to the regularized inverse via
    ``Psi_hat - Psi Pi_hat = (1/n) S_n Gamma_hat_dagger``.
    """
    eps = np.asarray(true_eps, dtype=float)
    if eps.shape != (s.n, s.dim):
        raise ValueError(f"expected innovations of shape {(s.n, s.dim)}, got {eps.shape}")
    if true_psi.dim != s.dim:
        raise ValueError("operator dimension does not match the sample")
    return HsOp(eps.T @ s.xs[: s.n])


def fit(s: Sample, rule: KRule) -> FarFit:
    """Run the full estimation pipeline on one sample.

    Deterministic: the same sample and rule give a bit-identical fit.
    """
    if s.n < 2:
        raise ValueError("need at least two transitions to fit")
    gamma_hat = cov_est(s)
    c_hat = autocov_est(s)
    eigen = eigensystem(gamma_hat)
    k = select_k(eigen, s.n, rule)
    gamma_dagger = reg_inverse(eigen, k)
    pi_hat_k = projection(eigen, k)
    psi_hat = estimate_psi(c_hat, gamma_dagger)
    raw, centered = residuals(s, psi_hat)
    raw.flags.writeable = False
    centered.flags.writeable = False
    return FarFit(
        gamma_hat=gamma_hat,
        c_hat=c_hat,
        eigen=eigen,
        k=k,
        gamma_dagger=gamma_dagger,
        pi_hat_k=pi_hat_k,
        psi_hat=psi_hat,
        raw_residuals=raw,
        centered_residuals=centered,
        sample_mean=sample_mean(s),
        x0=s.xs[0].copy(),
        xn=s.xs[-1].copy(),
    )
