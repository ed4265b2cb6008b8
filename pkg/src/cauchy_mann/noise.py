"""Noisy Cauchy data, spectral smoothing and the perturbed affine term."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from .fixed_point import CauchyData, FixedPointOperator
from .geometry import BoundaryFunction, boundary_l2_norm, boundary_modes, from_boundary_modes

__all__ = [
    "NOISE_MODELS",
    "NoiseSpec",
    "SmoothingOperator",
    "AffineBound",
    "noise_direction",
    "perturb_cauchy_data",
    "smooth",
    "smooth_cauchy_data",
    "perturbed_affine_term",
    "write_perturbation_csv",
]

NOISE_MODELS = ("per_node", "per_mode", "band_limited")
BAND_LIMIT = 20


@dataclass(frozen=True)
class NoiseSpec:
    """Relative noise level per data component.

    ``model`` is ``per_node`` (white noise on the nodes), ``per_mode``
    (Gaussian coefficients on every boundary mode) or ``band_limited``
    (Gaussian coefficients on modes ``1..20`` only).
    """

    relative_level: float
    seed: int = 0
    model: str = "band_limited"

    def __post_init__(self):
        if not self.relative_level >= 0:
            raise ValueError(f"relative noise level must be >= 0, got {self.relative_level}")
        if self.model not in NOISE_MODELS:
            raise ValueError(f"unknown noise model {self.model!r}; choose from {NOISE_MODELS}")


def noise_direction(template: BoundaryFunction, model: str, rng: np.random.Generator) -> np.ndarray:
    """Random perturbation of unit boundary-L2 norm on the nodes of ``template``."""
    if model == "per_node":
        d = rng.standard_normal(len(template))
    else:
        coeffs, freq = boundary_modes(template)
        keep = np.ones(len(freq), dtype=bool) if model == "per_mode" else (freq >= 1) & (freq <= BAND_LIMIT)
        c = np.zeros_like(coeffs)
        if np.iscomplexobj(coeffs):
            draw = rng.standard_normal((len(c), 2))
            c[keep] = draw[keep, 0] + 1j * draw[keep, 1]
            if len(template) % 2 == 0:
                c[-1] = c[-1].real
            c[0] = c[0].real
        else:
            c[keep] = rng.standard_normal(int(keep.sum()))
        d = from_boundary_modes(template, c).values
    norm = boundary_l2_norm(template.with_values(d))
    return d / norm if norm > 0 else d


def perturb_cauchy_data(data: CauchyData, spec: NoiseSpec) -> Tuple[CauchyData, float]:
    """Add noise of relative boundary-L2 size ``spec.relative_level`` to ``f`` and ``g``.

    Each component is perturbed by ``level * scale`` where ``scale`` is its own
    L2 norm, or the other component's norm if it vanishes (homogeneous
    Neumann data still receives noise). Returns the noisy data and the achieved
    ``||f_eps - f|| + ||g_eps - g||``.
    """
    nf, ng = boundary_l2_norm(data.f), boundary_l2_norm(data.g)
    if spec.relative_level == 0:
        return data, 0.0
    rng = np.random.default_rng(spec.seed)
    df = noise_direction(data.f, spec.model, rng) * spec.relative_level * (nf if nf > 0 else ng)
    dg = noise_direction(data.g, spec.model, rng) * spec.relative_level * (ng if ng > 0 else nf)
    noisy = data.replace(f=data.f + df, g=data.g + dg)
    eps = boundary_l2_norm(data.f.with_values(df)) + boundary_l2_norm(data.g.with_values(dg))
    return noisy, eps


@dataclass(frozen=True)
class SmoothingOperator:
    """Spectral cutoff ``N(eps) = max(1, ceil(eps^(-1/r)))``.

    For data in ``H^r`` the truncation error in ``H^s`` is ``O(eps^((r-s)/r))``.
    ``max_modes`` optionally caps the cutoff.
    """

    r: float = 2.0
    s: float = 0.5
    max_modes: Optional[int] = None

    def __post_init__(self):
        if not (self.r >= 0.5 and self.r >= self.s):
            raise ValueError(f"need r >= max(1/2, s), got r={self.r}, s={self.s}")

    def cutoff(self, eps: float) -> int:
        if eps <= 0:
            n = math.inf
        else:
            n = max(1, math.ceil(eps ** (-1.0 / self.r) - 1e-9))
        if self.max_modes is not None:
            n = min(n, self.max_modes)
        return n if n != math.inf else 10**9

    def rate(self, eps: float) -> float:
        """Exponent-only bound ``eps^((r-s)/r)`` for the smoothing error."""
        return eps ** ((self.r - self.s) / self.r)


def smooth(S: SmoothingOperator, f: BoundaryFunction, eps: float) -> BoundaryFunction:
    """Keep the lowest ``N(eps)`` boundary modes of ``f``.

    Open segments keep sine modes ``1..N``; closed segments keep frequencies
    ``0..N`` (the mean is never removed).
    """
    n = S.cutoff(eps)
    coeffs, freq = boundary_modes(f)
    kept = np.where(freq <= n, coeffs, 0)
    out = from_boundary_modes(f, kept)
    if not np.iscomplexobj(coeffs):
        # endpoint samples are not represented by the sine basis
        out.values[[0, -1]] = f.values[[0, -1]]
    return out


def smooth_cauchy_data(S: SmoothingOperator, data: CauchyData, eps: float) -> CauchyData:
    return data.replace(f=smooth(S, data.f, eps), g=smooth(S, data.g, eps))


@dataclass(frozen=True)
class AffineBound:
    """Achieved deviation of the perturbed affine term from the exact one."""

    star: float
    l2: float
    data_eps: float = float("nan")


def perturbed_affine_term(op: FixedPointOperator, data: CauchyData,
                          data_eps: float = float("nan")) -> Tuple[BoundaryFunction, AffineBound, FixedPointOperator]:
    """``z_eps = T(0)`` for ``data`` on the factorisations of ``op``.

    ``op`` must carry the exact data; the report holds ``||z_eps - z||`` in the
    star and L2 norms. The operator for the noisy data is returned as well.
    """
    noisy = op.with_data(data)
    d = noisy.z - op.z
    return noisy.affine_term(), AffineBound(op.norm(d), op.l2_norm(d), data_eps), noisy


def write_perturbation_csv(path, exact: BoundaryFunction, noisy: BoundaryFunction,
                           smoothed: Optional[BoundaryFunction] = None) -> None:
    """Nodes, exact, noisy and (optionally) smoothed samples of one data component."""
    params = exact.params if exact.params is not None else np.arange(len(exact), dtype=float)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["param", "exact", "noisy", "smoothed"] if smoothed is not None else ["param", "exact", "noisy"])
        for i in range(len(exact)):
            row = [repr(float(params[i])), repr(float(exact.values[i])), repr(float(noisy.values[i]))]
            if smoothed is not None:
                row.append(repr(float(smoothed.values[i])))
            w.writerow(row)
