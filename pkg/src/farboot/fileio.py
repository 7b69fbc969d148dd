"""External interfaces: CSV samples and clouds, TOML configs, JSON fits.

CSV samples use the schema ``t,c1,...,cd`` with one row per time point and
floats printed with 17 significant digits, which round-trips IEEE doubles
exactly.  JSON is always dumped with sorted keys and fixed separators so
identical inputs serialize byte-identically.
"""

from __future__ import annotations

import csv
import json
import sys
from pathlib import Path
from typing import Union

import numpy as np

from .estimation import EigenSystem, FarFit, KRule, format_k_rule
from .hilbert import FuncVec, HsOp, hs_norm, op_norm
from .process import (
    ExponentialSpectrum,
    FarModel,
    InnovationSpec,
    PolynomialSpectrum,
    Sample,
    Spectrum,
    make_psi,
)

if sys.version_info >= (3, 11):
    import tomllib as _toml
else:
    import tomli as _toml

__all__ = [
    "write_sample_csv",
    "read_sample_csv",
    "read_cloud_csv",
    "dump_json",
    "model_to_dict",
    "model_from_dict",
    "load_model_config",
    "load_toml",
    "fit_to_dict",
    "fit_from_dict",
]

_FLOAT_FMT = "%.17g"
PathLike = Union[str, Path]


def write_sample_csv(sample: Sample, path: PathLike) -> None:
    """One row per time point: ``t,c1,...,cd``."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t"] + [f"c{j + 1}" for j in range(sample.dim)])
        for t, row in enumerate(sample.xs):
            writer.writerow([t] + [_FLOAT_FMT % v for v in row])


def read_sample_csv(path: PathLike, seed: int = 0, model_tag: str = "csv") -> Sample:
    data = _read_matrix_csv(path, expect_time_column=True)
    return Sample(xs=data, seed=seed, model_tag=f"{model_tag}:{path}")


def read_cloud_csv(path: PathLike) -> np.ndarray:
    """Point cloud CSV: same schema as samples, one atom per row."""
    return _read_matrix_csv(path, expect_time_column=True)


def _read_matrix_csv(path: PathLike, expect_time_column: bool) -> np.ndarray:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        start = 1 if expect_time_column and header and header[0] == "t" else 0
        rows = [[float(v) for v in row[start:]] for row in reader if row]
    if not rows:
        raise ValueError(f"no data rows in {path}")
    return np.array(rows)


def dump_json(obj: dict, path: PathLike | None = None) -> str:
    """Deterministic JSON: sorted keys, fixed separators, trailing newline."""
    text = json.dumps(obj, sort_keys=True, separators=(",", ": "), indent=1) + "\n"
    if path is not None:
        Path(path).write_text(text)
    return text


def _spectrum_to_dict(spectrum: Spectrum) -> dict:
    if isinstance(spectrum, ExponentialSpectrum):
        return {"kind": "exponential", "c": spectrum.c, "rho": spectrum.rho}
    return {"kind": "polynomial", "c": spectrum.c, "a": spectrum.a}


def spectrum_from_dict(d: dict) -> Spectrum:
    kind = d.get("kind")
    if kind == "exponential":
        return ExponentialSpectrum(c=float(d["c"]), rho=float(d["rho"]))
    if kind == "polynomial":
        return PolynomialSpectrum(c=float(d["c"]), a=float(d["a"]))
    raise ValueError(f"unknown spectrum kind {kind!r}")


def model_to_dict(model: FarModel, burn_in: int = 500) -> dict:
    """Config-style description; dense operators are stored entrywise."""
    mat = model.psi.mat
    diag = np.diag(mat)
    if np.all(mat == np.diag(diag)):
        psi = {"kind": "diagonal_entries", "entries": [float(v) for v in diag]}
    else:
        psi = {"kind": "matrix", "rows": [[float(v) for v in row] for row in mat]}
    return {
        "dim": model.dim,
        "burn_in": burn_in,
        "psi": psi,
        "spectrum": _spectrum_to_dict(model.innovations.spectrum),
    }


def _psi_from_dict(d: dict, dim: int) -> HsOp:
    kind = d.get("kind")
    if kind == "diagonal_entries":
        return HsOp(np.diag([float(v) for v in d["entries"]]))
    if kind == "matrix":
        return HsOp(np.array(d["rows"], dtype=float))
    params = {k: v for k, v in d.items() if k != "kind"}
    return make_psi(kind, params, dim)


def model_from_dict(d: dict) -> tuple[FarModel, int]:
    """Inverse of ``model_to_dict``; also accepts ``make_psi`` kinds
    (``diagonal_exponential``, ``dense_random``) with their parameters."""
    dim = int(d["dim"])
    burn_in = int(d.get("burn_in", 500))
    psi = _psi_from_dict(d["psi"], dim)
    spectrum = spectrum_from_dict(d["spectrum"])
    return FarModel(psi, InnovationSpec(dim, spectrum)), burn_in


def load_toml(path: PathLike) -> dict:
    with open(path, "rb") as fh:
        return _toml.load(fh)


def load_model_config(path: PathLike) -> tuple[FarModel, int]:
    cfg = load_toml(path)
    if "model" not in cfg:
        raise ValueError(f"config {path} has no [model] section")
    return model_from_dict(cfg["model"])


def _matrix(rows) -> np.ndarray:
    return np.array(rows, dtype=float)


def fit_to_dict(f: FarFit, k_rule: KRule | None = None) -> dict:
    """Full JSON image of a fit: estimates, spectrum, residuals, diagnostics.

    The projection identities are reported as norms so a reader can confirm
    the regularized inverse, projection and operator estimate are mutually
    consistent without recomputing anything.
    """
    pi, gd, gh, ch, ps = f.pi_hat_k, f.gamma_dagger, f.gamma_hat, f.c_hat, f.psi_hat
    resid_cov = (f.centered_residuals.T @ f.centered_residuals) / f.n
    out = {
        "dim": f.dim,
        "n": f.n,
        "k": f.k,
        "degenerate_spectrum": f.degenerate,
        "eigenvalues": [float(v) for v in f.eigen.lambdas],
        "eigen_gaps": [float(v) for v in f.eigen.gaps],
        "eigenvectors": [[float(v) for v in row] for row in f.eigen.vectors],
        "gamma_hat": [[float(v) for v in row] for row in gh.mat],
        "c_hat": [[float(v) for v in row] for row in ch.mat],
        "gamma_dagger": [[float(v) for v in row] for row in gd.mat],
        "pi_hat_k": [[float(v) for v in row] for row in pi.mat],
        "psi_hat": [[float(v) for v in row] for row in ps.mat],
        "sample_mean": [float(v) for v in f.sample_mean.coeffs],
        "x0": [float(v) for v in f.x0],
        "xn": [float(v) for v in f.xn],
        "raw_residuals": [[float(v) for v in row] for row in f.raw_residuals],
        "centered_residuals": [[float(v) for v in row] for row in f.centered_residuals],
        "diagnostics": {
            "op_norm_psi_hat": op_norm(ps),
            "projection_vs_gamma_dagger_left": hs_norm(pi - gh @ gd),
            "projection_vs_gamma_dagger_right": hs_norm(pi - gd @ gh),
            "psi_projection_consistency": hs_norm(ps @ pi - ps),
            "residual_mean_norm": float(np.linalg.norm(f.raw_residuals.mean(axis=0))),
            "residual_cov_trace": float(np.trace(resid_cov)),
        },
    }
    if k_rule is not None:
        out["k_rule"] = format_k_rule(k_rule)
    return out


def fit_from_dict(d: dict) -> FarFit:
    """Rebuild a fit from its JSON image (for the bootstrap front door)."""
    lambdas = np.array(d["eigenvalues"], dtype=float)
    vectors = _matrix(d["eigenvectors"])
    gaps = np.array(d["eigen_gaps"], dtype=float)
    for arr in (lambdas, vectors, gaps):
        arr.flags.writeable = False
    eigen = EigenSystem(
        lambdas=lambdas, vectors=vectors, gaps=gaps, degenerate=bool(d["degenerate_spectrum"])
    )
    centered = _matrix(d["centered_residuals"])
    raw = _matrix(d["raw_residuals"])
    centered.flags.writeable = False
    raw.flags.writeable = False
    return FarFit(
        gamma_hat=HsOp(_matrix(d["gamma_hat"])),
        c_hat=HsOp(_matrix(d["c_hat"])),
        eigen=eigen,
        k=int(d["k"]),
        gamma_dagger=HsOp(_matrix(d["gamma_dagger"])),
        pi_hat_k=HsOp(_matrix(d["pi_hat_k"])),
        psi_hat=HsOp(_matrix(d["psi_hat"])),
        raw_residuals=raw,
        centered_residuals=centered,
        sample_mean=FuncVec(np.array(d["sample_mean"], dtype=float)),
        x0=np.array(d["x0"], dtype=float),
        xn=np.array(d["xn"], dtype=float),
    )
