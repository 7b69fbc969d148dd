"""The first-order functional autoregression and its simulation.

The data-generating process is ``X_{t+1} = Psi(X_t) + eps_{t+1}`` with a
bounded linear operator ``Psi`` of spectral norm below one and centered
Gaussian innovations whose covariance is diagonal in the representation
basis.  The diagonal convention makes the declared spectrum the exact
innovation eigenvalues, so the stationary covariance of diagonal models has
a closed form that the estimation tests can use as an oracle; dense
stationary covariances are still reachable through dense ``Psi``.

``stationary_cov`` also provides the ground truth for general models by
summing the series ``sum_k Psi^k Gamma_eps (Psi^k)^T``, which solves the
fixed-point equation ``Gamma = Psi Gamma Psi^T + Gamma_eps``.  The lag-1
autocovariance follows as ``C = Psi Gamma``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from .hilbert import FuncVec, HsOp, op_norm
from .rng import make_rng

__all__ = [
    "ExponentialSpectrum",
    "PolynomialSpectrum",
    "Spectrum",
    "InnovationSpec",
    "FarModel",
    "Sample",
    "diagonal_exponential_psi",
    "dense_random_psi",
    "make_psi",
    "draw_innovation",
    "draw_innovations",
    "simulate",
    "ma_closed_form_path",
    "stationary_cov",
]


@dataclass(frozen=True)
class ExponentialSpectrum:
    """Eigenvalue sequence ``lam_j = c * rho**j`` for ``j = 1, 2, ...``."""

    c: float
    rho: float

    def __post_init__(self) -> None:
        if not self.c > 0:
            raise ValueError("scale c must be positive")
        if not 0 < self.rho < 1:
            raise ValueError("ratio rho must lie in (0, 1)")

    def lam(self, j) -> np.ndarray:
        j = np.asarray(j, dtype=float)
        return self.c * self.rho**j


@dataclass(frozen=True)
class PolynomialSpectrum:
    """Eigenvalue sequence ``lam_j = c * j**(-a-1)`` for ``j = 1, 2, ...``.

    The exponent is required to exceed 2 (``a > 1``) so that the eigengap
    conditions of the truncation-level rules apply.
    """

    c: float
    a: float

    def __post_init__(self) -> None:
        if not self.c > 0:
            raise ValueError("scale c must be positive")
        if not self.a > 1:
            raise ValueError("decay exponent a must exceed 1")

    def lam(self, j) -> np.ndarray:
        j = np.asarray(j, dtype=float)
        return self.c * j ** (-self.a - 1.0)


Spectrum = Union[ExponentialSpectrum, PolynomialSpectrum]

# stream index separating operator construction from path simulation
_PSI_STREAM = 91


@dataclass(frozen=True)
class InnovationSpec:
    """Law of the innovations: centered Gaussian, diagonal covariance.

    Coefficient ``j`` (1-based) has variance ``spectrum.lam(j)``.  Gaussian
    tails make all fourth moments finite automatically.
    """

    dim: int
    spectrum: Spectrum

    def __post_init__(self) -> None:
        if self.dim < 1:
            raise ValueError("dimension must be at least 1")

    @property
    def lambdas(self) -> np.ndarray:
        """Innovation variances per coordinate, descending."""
        return self.spectrum.lam(np.arange(1, self.dim + 1))

    def covariance(self) -> HsOp:
        return HsOp(np.diag(self.lambdas))


@dataclass(frozen=True)
class FarModel:
    """True process specification: operator plus innovation law."""

    psi: HsOp
    innovations: InnovationSpec

    def __post_init__(self) -> None:
        if self.psi.dim != self.innovations.dim:
            raise ValueError(
                f"dimension mismatch: psi {self.psi.dim}, innovations {self.innovations.dim}"
            )
        nrm = op_norm(self.psi)
        if not nrm < 1.0:
            raise ValueError(f"no stationary solution: op_norm(psi) = {nrm} >= 1")

    @property
    def dim(self) -> int:
        return self.psi.dim


@dataclass(frozen=True, eq=False)
class Sample:
    """An observed path ``X_0, ..., X_n``, one curve per row.

    ``eps`` records the innovations that produced the transitions (row
    ``t-1`` holds the shock entering ``X_t``); it is populated by
    ``simulate`` and used by simulation-only diagnostics.
    """

    xs: np.ndarray
    seed: int
    model_tag: str
    eps: Optional[np.ndarray] = None

    def __post_init__(self) -> None:
        xs = np.array(self.xs, dtype=float)
        if xs.ndim != 2 or xs.shape[0] < 2:
            raise ValueError("a sample needs at least two curves X_0, X_1")
        if not np.all(np.isfinite(xs)):
            raise ValueError("sample contains non-finite values")
        xs.flags.writeable = False
        object.__setattr__(self, "xs", xs)
        if self.eps is not None:
            eps = np.array(self.eps, dtype=float)
            if eps.shape != (xs.shape[0] - 1, xs.shape[1]):
                raise ValueError("innovation record must have one row per transition")
            eps.flags.writeable = False
            object.__setattr__(self, "eps", eps)

    @property
    def n(self) -> int:
        return self.xs.shape[0] - 1

    @property
    def dim(self) -> int:
        return self.xs.shape[1]


def diagonal_exponential_psi(gamma: float, rho: float, dim: int) -> HsOp:
    """Diagonal operator with entries ``gamma * rho**j`` for ``j = 1..dim``."""
    if not 0 < rho < 1:
        raise ValueError("rho must lie in (0, 1)")
    if not 0 < gamma * rho < 1:
        raise ValueError(f"op_norm would be {gamma * rho} >= 1 (or <= 0)")
    entries = gamma * rho ** np.arange(1, dim + 1, dtype=float)
    return HsOp(np.diag(entries))


def dense_random_psi(target_norm: float, dim: int, seed: int) -> HsOp:
    """Seeded dense Gaussian matrix rescaled to an exact spectral norm."""
    if not 0 < target_norm < 1:
        raise ValueError("target_norm must lie in (0, 1)")
    rng = make_rng(seed, _PSI_STREAM)
    raw = rng.standard_normal((dim, dim))
    return HsOp(raw * (target_norm / np.linalg.norm(raw, 2)))


def make_psi(kind: str, params: dict, dim: int) -> HsOp:
    """Construct the autoregression operator from a config-style description."""
    if kind == "diagonal_exponential":
        return diagonal_exponential_psi(params["gamma"], params["rho"], dim)
    if kind == "dense_random":
        return dense_random_psi(params["target_norm"], dim, params["seed"])
    raise ValueError(f"unknown psi kind: {kind!r}")


def draw_innovation(spec: InnovationSpec, rng: np.random.Generator) -> FuncVec:
    """One innovation draw; successive calls on the same generator are independent."""
    return FuncVec(rng.standard_normal(spec.dim) * np.sqrt(spec.lambdas))


def draw_innovations(spec: InnovationSpec, size: int, rng: np.random.Generator) -> np.ndarray:
    """A block of ``size`` independent innovation draws, one per row."""
    return rng.standard_normal((size, spec.dim)) * np.sqrt(spec.lambdas)


def simulate(
    model: FarModel,
    n: int,
    burn_in: int = 500,
    seed: int = 0,
    innovations: Optional[np.ndarray] = None,
) -> Sample:
    """Iterate the autoregression and record ``n + 1`` consecutive states.

    The recursion starts from the zero curve, runs ``burn_in`` warm-up steps
    and then records ``X_0, ..., X_n``.  The default warm-up of 500 steps is
    far beyond the memory of any admissible operator (``0.9**500 < 1e-22``).
    Deterministic given ``seed``.

    ``innovations`` is a test hook: a ``(burn_in + n, dim)`` array used in
    place of random draws (e.g. all zeros to check the zero fixed point).
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    if burn_in < 0:
        raise ValueError("burn_in must be nonnegative")
    d = model.dim
    total = burn_in + n
    if innovations is None:
        rng = make_rng(seed)
        eps = draw_innovations(model.innovations, total, rng)
    else:
        eps = np.asarray(innovations, dtype=float)
        if eps.shape != (total, d):
            raise ValueError(f"innovation override must have shape {(total, d)}")
    psi = model.psi.mat
    x = np.zeros(d)
    for t in range(burn_in):
        x = psi @ x + eps[t]
    xs = np.empty((n + 1, d))
    xs[0] = x
    for t in range(n):
        x = psi @ x + eps[burn_in + t]
        xs[t + 1] = x
    tag = f"far1(d={d}, {model.innovations.spectrum!r}, burn_in={burn_in})"
    return Sample(xs=xs, seed=seed, model_tag=tag, eps=eps[burn_in:])


def ma_closed_form_path(psi: HsOp, x0: np.ndarray, eps: np.ndarray) -> np.ndarray:
    """Path via the finite moving-average form ``X_t = Psi^t(x0) + sum_k Psi^(t-k)(eps_k)``.

    Evaluates the explicit power series, not the recursion, so it serves as
    an independent cross-check of generated paths.  ``eps`` has one row per
    transition; the result has ``len(eps) + 1`` rows starting at ``x0``.
    """
    d = psi.dim
    x0 = np.asarray(x0, dtype=float)
    steps = eps.shape[0]
    powers = np.empty((steps + 1, d, d))
    powers[0] = np.eye(d)
    for t in range(steps):
        powers[t + 1] = psi.mat @ powers[t]
    out = np.empty((steps + 1, d))
    out[0] = x0
    for t in range(1, steps + 1):
        # sum_{k=1}^{t} Psi^(t-k) eps_k, evaluated as one contraction
        out[t] = powers[t] @ x0 + np.einsum("kij,kj->i", powers[t - 1 :: -1], eps[:t])
    return out


def stationary_cov(model: FarModel, tol: float = 1e-14, max_terms: int = 100_000) -> tuple[HsOp, HsOp]:
    """Ground-truth covariance and lag-1 autocovariance of the stationary law.

    Sums ``Gamma = sum_k Psi^k Gamma_eps (Psi^k)^T`` until the increment's
    Hilbert-Schmidt norm drops below ``tol``, then sets ``C = Psi Gamma``.
    Non-convergence within ``max_terms`` signals an unstable operator.
    """
    psi = model.psi.mat
    term = np.diag(model.innovations.lambdas)
    gamma = term.copy()
    for _ in range(max_terms):
        term = psi @ term @ psi.T
        gamma += term
        if np.linalg.norm(term, "fro") < tol:
            break
    else:
        raise RuntimeError(
            "stationary covariance series did not converge; operator norm is not safely below 1"
        )
    gamma = 0.5 * (gamma + gamma.T)
    return HsOp(gamma), HsOp(psi @ gamma)
