"""Exact diagonal model of the Cauchy fixed-point operator on a square.

On ``[-pi, pi]^2`` with data on ``x = -pi``, unknown flux on ``x = pi`` and
``u = 0`` on ``y = +-pi``, every sine mode ``sin(j y)`` is an eigenfunction:

    (T phi)_j = lam_j phi_j + (j alpha_j / beta_j^2) a_j + b_j / beta_j

with ``alpha_j = sinh(2 pi j)``, ``beta_j = cosh(2 pi j)``,
``lam_j = tanh(2 pi j)^2``. ``a_j``, ``b_j`` are the sine coefficients of the
Dirichlet data and of ``du/dx`` on ``x = -pi``.

Everything is evaluated through ``q_j = exp(-4 pi j)`` so that the gaps
``1 - lam_j = 4 q_j / (1 + q_j)^2`` keep full relative precision. Because the
operator is diagonal, iterates at any index ``k`` are available in closed
form, which makes stopping indices of order ``1e10`` cheap to find.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np
import scipy.special as sc

from .errors import BoundViolated, InequalityViolated, ModeMismatch
from .iteration import SegmentingSchedule

__all__ = [
    "FourierTrace",
    "SpectralOperator",
    "spectral_apply_T",
    "log_source_filter",
    "source_element",
    "closed_form_iterate",
    "stopping_index",
    "worst_case_element",
    "RateTable",
    "run_rate_experiment",
    "exact_error_curve",
    "fit_slope",
    "stopping_law",
    "SemiConvergence",
    "semi_convergence",
    "variation",
    "appendix_bounds_check",
    "sobolev_interpretation_check",
]

MAX_MODES = 50


@dataclass(frozen=True)
class FourierTrace:
    """Sine coefficients ``phi_j``, ``j = 1..N``, of a trace on ``(-pi, pi)``."""

    coefficients: np.ndarray

    @property
    def N(self) -> int:
        return len(self.coefficients)

    def sobolev_norm(self, s: float) -> float:
        j = np.arange(1, self.N + 1)
        return float(np.sqrt(np.sum((1.0 + j**2) ** s * self.coefficients**2)))


class SpectralOperator:
    """Diagonal fixed-point operator with ``N`` sine modes.

    ``norm`` is the mode-weighted norm ``sum (1 + j^2)^s phi_j^2`` with
    ``s = -1/2`` by default; ``l2_norm`` is the ``L^2(-pi, pi)`` norm.
    """

    def __init__(self, N: int, a=None, b=None, s: float = -0.5):
        if not 1 <= N <= MAX_MODES:
            raise ValueError(f"mode cutoff must be in 1..{MAX_MODES}, got {N}")
        j = np.arange(1, N + 1, dtype=float)
        self.N = N
        self.j = j
        q = np.exp(-4.0 * np.pi * j)
        self.tanh = (1.0 - q) / (1.0 + q)
        self.sech = 2.0 * np.exp(-2.0 * np.pi * j) / (1.0 + q)
        self.lam = self.tanh**2
        self.log_gap = math.log(4.0) - 4.0 * np.pi * j - 2.0 * np.log1p(q)
        self.gap = np.exp(self.log_gap)
        self.s = s
        self.weights = (1.0 + j**2) ** s
        self.a = np.zeros(N) if a is None else self._check(a)
        self.b = np.zeros(N) if b is None else self._check(b)
        self.z = j * self.tanh * self.sech * self.a + self.sech * self.b

    @classmethod
    def from_solution(cls, phibar, s: float = -0.5) -> "SpectralOperator":
        """Operator whose fixed point is ``phibar`` (affine term ``(1 - lam) phibar``)."""
        phibar = np.asarray(phibar, dtype=float)
        op = cls(len(phibar), s=s)
        op.z = op.gap * phibar
        return op

    def with_affine_term(self, z) -> "SpectralOperator":
        new = object.__new__(SpectralOperator)
        new.__dict__.update(self.__dict__)
        new.z = self._check(z).copy()
        return new

    def _check(self, x):
        x = np.asarray(x.coefficients if isinstance(x, FourierTrace) else x, dtype=float)
        if x.shape != (self.N,):
            raise ModeMismatch(f"expected {self.N} modes, got {x.shape}")
        return x

    def exact_flux(self) -> np.ndarray:
        """Fixed point for the stored Cauchy coefficients: ``j alpha a + beta b``."""
        with np.errstate(over="raise"):
            alpha = np.sinh(2.0 * np.pi * self.j)
            beta = np.cosh(2.0 * np.pi * self.j)
        return self.j * alpha * self.a + beta * self.b

    def fixed_point(self) -> np.ndarray:
        return self.z / self.gap

    # array-level protocol
    @property
    def size(self) -> int:
        return self.N

    def T(self, x):
        return self.lam * x + self.z

    def T_linear(self, x):
        return self.lam * x

    def inner(self, x, y) -> float:
        return float(np.sum(self.weights * x * y))

    def norm(self, x) -> float:
        return float(np.sqrt(np.sum(self.weights * np.asarray(x) ** 2)))

    def l2_norm(self, x) -> float:
        return float(np.sqrt(np.pi * np.sum(np.asarray(x) ** 2)))

    def noise(self, eps: float, seed: int = 0) -> np.ndarray:
        """Gaussian per-mode perturbation rescaled to norm ``eps``."""
        d = np.random.default_rng(seed).standard_normal(self.N)
        return eps * d / self.norm(d)


def spectral_apply_T(op: SpectralOperator, phi: FourierTrace) -> FourierTrace:
    return FourierTrace(op.T(op._check(phi)))


def log_source_filter(lam, p: float, log_lam=None):
    """``(ln(e / lam))^(-p)`` with value 0 at ``lam = 0``.

    ``log_lam`` may be passed to avoid evaluating ``log`` of tiny arguments.
    """
    if log_lam is None:
        lam = np.asarray(lam, dtype=float)
        with np.errstate(divide="ignore"):
            log_lam = np.log(lam)
    log_lam = np.asarray(log_lam, dtype=float)
    out = np.zeros_like(log_lam)
    pos = np.isfinite(log_lam)
    out[pos] = (1.0 - log_lam[pos]) ** (-p)
    return out if out.ndim else float(out)


def source_element(op: SpectralOperator, p: float, psi) -> FourierTrace:
    """``f(I - T_l) psi`` for the logarithmic filter with exponent ``p``."""
    if not p > 0:
        raise ValueError("source exponent must be positive")
    return FourierTrace(log_source_filter(op.gap, p, log_lam=op.log_gap) * op._check(psi))


def worst_case_element(op: SpectralOperator, scale: float = 1.0) -> np.ndarray:
    """Initial error whose discrepancy-residual envelope decays like ``k^(-1/2)``.

    Mode ``j`` gets weighted amplitude ``scale * (1 - lam_j)^(-1/2)`` so that
    each mode contributes equally to ``sum_j (1 - lam_j) ||e_j||^2``; this
    element saturates the ``O(eps^-2)`` bound for the stopping index.
    """
    return scale * np.exp(-0.5 * op.log_gap) / np.sqrt(op.weights)


def _log_keep(gap: np.ndarray, log_gap: np.ndarray, k: float, schedule: SegmentingSchedule) -> np.ndarray:
    """Log of the error multiplier ``prod_{i<k} (1 - d_i gap)`` per mode."""
    steps = k - 1.0
    if steps <= 0:
        return np.zeros_like(gap)
    if schedule.kind == "identity":
        return steps * np.log1p(-gap)
    if schedule.kind == "constant":
        return steps * np.log1p(-schedule.value * gap)
    if schedule.kind == "harmonic":
        # sum_{m=2}^{k} log(1 - c/m) = -sum_n c^n/n (H_k^(n) - 1)
        n = np.arange(1, 80, dtype=float)[:, None]
        h1 = sc.digamma(k + 1.0) + np.euler_gamma - 1.0
        hn = sc.zeta(n[1:, 0], 1.0) - sc.zeta(n[1:, 0], k + 1.0) - 1.0
        h = np.concatenate(([h1], hn))[:, None]
        powers = np.exp(n * log_gap[None, :])
        return -np.sum(powers / n * h, axis=0)
    if k > 1e7:
        raise ValueError("closed form unavailable for custom schedules beyond 1e7 steps")
    d = np.array([schedule(i) for i in range(1, int(k))])
    return np.sum(np.log1p(-np.outer(d, gap)), axis=0)


def closed_form_iterate(op: SpectralOperator, phi1, k: float,
                        schedule: SegmentingSchedule = SegmentingSchedule.identity(), z=None) -> np.ndarray:
    """Averaged iterate ``v_k`` of the segmenting iteration, mode by mode.

    Uses ``v_k = P_k phi1 + (1 - P_k) z / (1 - lam)`` with the multiplier
    ``P_k`` in log form; ``(1 - P_k) / (1 - lam)`` is evaluated with ``expm1``.
    """
    zz = op.z if z is None else np.asarray(z, dtype=float)
    logp = _log_keep(op.gap, op.log_gap, float(k), schedule)
    keep = np.exp(logp)
    acc = -np.expm1(logp) / op.gap
    return keep * np.asarray(phi1, dtype=float) + acc * zz


def stopping_index(op: SpectralOperator, phi1, mu: float, eps: float, z=None,
                   schedule: SegmentingSchedule = SegmentingSchedule.identity(),
                   k_max: float = 1e18) -> Optional[int]:
    """First ``k`` with ``||z - (I - T_l) v_k|| <= mu eps`` (residuals are monotone)."""
    zz = op.z if z is None else np.asarray(z, dtype=float)

    def res(k):
        return op.norm(zz - op.gap * closed_form_iterate(op, phi1, k, schedule, zz))

    thr = mu * eps
    if res(1) <= thr:
        return 1
    hi = 2
    while res(hi) > thr:
        if hi > k_max:
            return None
        hi *= 2
    lo = hi // 2
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if res(mid) <= thr:
            hi = mid
        else:
            lo = mid
    return hi


def exact_error_curve(op: SpectralOperator, phi1, phibar, ks,
                      schedule: SegmentingSchedule = SegmentingSchedule.identity(), z=None) -> np.ndarray:
    return np.array([op.norm(closed_form_iterate(op, phi1, k, schedule, z) - phibar) for k in ks])


def fit_slope(x, y) -> float:
    """Least-squares slope of ``log y`` against ``log x``."""
    lx, ly = np.log(np.asarray(x, float)), np.log(np.asarray(y, float))
    return float(np.polyfit(lx, ly, 1)[0])


@dataclass
class RateTable:
    p: float
    mu: float
    eps: List[float] = field(default_factory=list)
    k_eps: List[int] = field(default_factory=list)
    error: List[float] = field(default_factory=list)
    residual: List[float] = field(default_factory=list)
    ks: List[float] = field(default_factory=list)
    exact_error: List[float] = field(default_factory=list)

    @property
    def slope_k(self) -> float:
        """Fitted exponent of ``k_eps`` against ``eps``."""
        return fit_slope(self.eps, self.k_eps)

    @property
    def slope_klog(self) -> float:
        """Fitted exponent of ``k_eps (ln k_eps)^p`` against ``1 / eps``."""
        k = np.asarray(self.k_eps, float)
        return fit_slope(1.0 / np.asarray(self.eps), k * np.log(np.maximum(k, 2.0)) ** self.p)

    def error_ratio(self) -> np.ndarray:
        """``||e_{k_eps}|| / (-ln sqrt(eps))^(-p)`` per sweep point."""
        e = np.asarray(self.eps)
        return np.asarray(self.error) * (-np.log(np.sqrt(e))) ** self.p

    def envelope(self) -> np.ndarray:
        """``||e_k|| (ln k)^p`` on the exact-data grid."""
        return np.asarray(self.exact_error) * np.log(np.asarray(self.ks)) ** self.p

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["eps", "k_eps", "err", "residual", "err_ratio"])
        for row in zip(self.eps, self.k_eps, self.error, self.residual, self.error_ratio()):
            w.writerow([repr(float(row[0])), int(row[1]), repr(float(row[2])), repr(float(row[3])),
                        repr(float(row[4]))])
        w.writerow([])
        w.writerow(["k", "exact_err", "err_times_lnk_p"])
        for k, e, v in zip(self.ks, self.exact_error, self.envelope()):
            w.writerow([repr(float(k)), repr(float(e)), repr(float(v))])
        w.writerow([])
        w.writerow(["fit", "value"])
        w.writerow(["slope_k_vs_eps", repr(self.slope_k)])
        w.writerow(["slope_klnkp_vs_inv_eps", repr(self.slope_klog)])
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", newline="") as fh:
                fh.write(text)
        return text


def run_rate_experiment(op: SpectralOperator, p: float, psi, eps_grid: Sequence[float], mu: float = 3.0,
                        seed: int = 0, ks: Sequence[float] = (), phi1=None,
                        schedule: SegmentingSchedule = SegmentingSchedule.identity(),
                        normalize: bool = False) -> RateTable:
    """Discrepancy-stopped runs under the source condition ``phibar - phi1 = f(P) psi``.

    The noise direction is drawn once from ``seed`` and rescaled to each
    ``eps``; ``ks`` is the index grid for the exact-data error curve. With
    ``normalize`` the element ``psi`` is rescaled so that the exact affine
    term has unit norm, making ``eps`` a relative noise level.
    """
    if len(eps_grid) == 0:
        raise ValueError("empty noise-level grid")
    if mu <= 2:
        raise ValueError(f"rate statements need mu > 2, got {mu}")
    phi1 = np.zeros(op.N) if phi1 is None else np.asarray(phi1, float)
    e1 = source_element(op, p, psi).coefficients
    if normalize:
        e1 = e1 / op.norm(op.gap * e1)
    phibar = phi1 + e1
    exact = op.with_affine_term(op.gap * phibar)
    direction = exact.noise(1.0, seed)
    table = RateTable(p=p, mu=mu)
    for eps in eps_grid:
        z_eps = exact.z + eps * direction
        k = stopping_index(exact, phi1, mu, eps, z_eps, schedule)
        if k is None:
            raise RuntimeError(f"discrepancy principle did not stop for eps={eps}")
        v = closed_form_iterate(exact, phi1, k, schedule, z_eps)
        table.eps.append(float(eps))
        table.k_eps.append(int(k))
        table.error.append(exact.norm(v - phibar))
        table.residual.append(exact.norm(z_eps - exact.gap * v))
    table.ks = [float(k) for k in ks]
    table.exact_error = list(exact_error_curve(exact, phi1, phibar, ks, schedule)) if len(ks) else []
    return table


def stopping_law(op: SpectralOperator, eps_grid: Sequence[float], mu: float = 3.0, seed: int = 0,
                 schedule: SegmentingSchedule = SegmentingSchedule.identity()):
    """Stopping indices for the :func:`worst_case_element` normalised to ``||z|| = 1``.

    Returns ``(k_eps, slope)`` where ``slope`` is the least-squares exponent of
    ``k_eps`` against ``eps``.
    """
    if len(eps_grid) == 0:
        raise ValueError("empty noise-level grid")
    w = worst_case_element(op)
    exact = op.with_affine_term(op.gap * w / op.norm(op.gap * w))
    direction = exact.noise(1.0, seed)
    ks = []
    for eps in eps_grid:
        k = stopping_index(exact, np.zeros(op.N), mu, eps, exact.z + eps * direction, schedule)
        if k is None:
            raise RuntimeError(f"discrepancy principle did not stop for eps={eps}")
        ks.append(k)
    return ks, fit_slope(eps_grid, ks)


@dataclass
class SemiConvergence:
    ks: np.ndarray
    error: np.ndarray
    residual: np.ndarray
    eps: float
    k_stop: int
    err_stop: float

    @property
    def k_min(self) -> float:
        return float(self.ks[np.argmin(self.error)])

    @property
    def err_min(self) -> float:
        return float(np.min(self.error))

    @property
    def interior(self) -> bool:
        """Minimum strictly inside the index range with larger errors on both ends."""
        i = int(np.argmin(self.error))
        return 0 < i < len(self.error) - 1

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["k", "err", "residual"])
        for k, e, r in zip(self.ks, self.error, self.residual):
            w.writerow([repr(float(k)), repr(float(e)), repr(float(r))])
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", newline="") as fh:
                fh.write(text)
        return text


def semi_convergence(op: SpectralOperator, p: float = 1.0, noise_level: float = 0.05, mu: float = 3.0,
                     seed: int = 0, k_max: float = 1e17, n_k: int = 400,
                     schedule: SegmentingSchedule = SegmentingSchedule.identity()) -> SemiConvergence:
    """Error curve of ``v_k`` under relative noise on the affine term.

    The exact solution is the source element with ``psi = 1`` and exponent
    ``p`` scaled to ``||z|| = 1``; the affine term is perturbed by
    ``noise_level * ||z||`` and the run starts from zero.
    """
    e1 = source_element(op, p, np.ones(op.N)).coefficients
    phibar = e1 / op.norm(op.gap * e1)
    exact = op.with_affine_term(op.gap * phibar)
    eps = noise_level * exact.norm(exact.z)
    z_eps = exact.z + exact.noise(eps, seed)
    ks = np.unique(np.round(np.logspace(0, math.log10(k_max), n_k)))
    phi1 = np.zeros(op.N)
    iterates = [closed_form_iterate(exact, phi1, k, schedule, z_eps) for k in ks]
    err = np.array([exact.norm(v - phibar) for v in iterates])
    res = np.array([exact.norm(z_eps - exact.gap * v) for v in iterates])
    k_stop = stopping_index(exact, phi1, mu, eps, z_eps, schedule, k_max=k_max)
    if k_stop is None:
        raise RuntimeError("discrepancy principle did not stop")
    err_stop = exact.norm(closed_form_iterate(exact, phi1, k_stop, schedule, z_eps) - phibar)
    return SemiConvergence(ks, err, res, eps, k_stop, err_stop)


def variation(values) -> float:
    """``(max - min) / max`` of a positive sequence."""
    v = np.asarray(values, dtype=float)
    return float((v.max() - v.min()) / v.max())


# -- scalar bounds ------------------------------------------------------------------


@dataclass
class BoundsReport:
    p: float
    ks: np.ndarray
    f_ratio: np.ndarray
    g_ratio: np.ndarray
    C_f: float
    C_g: float
    h_min_second_difference: float

    @property
    def ok(self) -> bool:
        return bool(np.isfinite(self.C_f) and np.isfinite(self.C_g) and self.h_min_second_difference >= -1e-12)


def _lambda_grid(n: int) -> np.ndarray:
    return np.concatenate(([0.0], np.logspace(-12, 0, n - 1)))


def appendix_bounds_check(p: float, ks: Sequence[int], n_lambda: int = 10_000,
                          t_grid: Optional[np.ndarray] = None, C_f: Optional[float] = None,
                          C_g: Optional[float] = None) -> BoundsReport:
    """Check the filter-function bounds on a ``lambda`` grid.

    For each ``k >= 2``: ``max_lam (1-lam)^k (ln(e/lam))^-p * (ln k)^p`` and
    ``max_lam (1-lam)^k lam (ln(e/lam))^-p * k (ln k)^p``. The constants are
    fitted as the maxima over ``ks`` unless given, in which case a violation
    raises :class:`BoundViolated` with the witness ``(lam, k)``. Also checks
    convexity of ``t -> exp(-t^(-1/(2p)))^2 t`` through second differences.
    """
    if not p > 0:
        raise ValueError("p must be positive")
    lam = _lambda_grid(n_lambda)
    with np.errstate(divide="ignore"):
        loglam = np.log(lam)
    filt = log_source_filter(lam, p, loglam)
    ks = np.asarray([k for k in ks if k >= 2], dtype=float)
    f_ratio = np.empty(len(ks))
    g_ratio = np.empty(len(ks))
    f_arg = np.empty(len(ks), dtype=int)
    g_arg = np.empty(len(ks), dtype=int)
    for i, k in enumerate(ks):
        with np.errstate(divide="ignore"):
            decay = np.exp(k * np.log1p(-np.minimum(lam, 1.0 - 1e-300)))
        decay[lam >= 1.0] = 0.0
        fh = decay * filt * np.log(k) ** p
        gh = decay * lam * filt * k * np.log(k) ** p
        f_arg[i], g_arg[i] = np.argmax(fh), np.argmax(gh)
        f_ratio[i], g_ratio[i] = fh[f_arg[i]], gh[g_arg[i]]
    for C, ratio, arg, name in ((C_f, f_ratio, f_arg, "f"), (C_g, g_ratio, g_arg, "g")):
        if C is not None and np.any(ratio > C):
            i = int(np.argmax(ratio > C))
            raise BoundViolated(f"{name}-bound exceeds C={C}", (float(lam[arg[i]]), int(ks[i])))
    cf = float(np.max(f_ratio)) if C_f is None else C_f
    cg = float(np.max(g_ratio)) if C_g is None else C_g

    t = np.linspace(1e-6, 1.0, 10_001) if t_grid is None else np.asarray(t_grid, float)
    h = np.exp(-(t ** (-1.0 / (2.0 * p)))) ** 2 * t
    second = h[2:] - 2.0 * h[1:-1] + h[:-2]
    return BoundsReport(p, ks, f_ratio, g_ratio, cf, cg, float(np.min(second)))


@dataclass
class SobolevReport:
    p: float
    lhs: List[float]
    rhs: List[float]
    partial_sums: np.ndarray


def sobolev_interpretation_check(p: float, N: int = 50, dps: int = 50, n_terms: int = 10_000) -> SobolevReport:
    """Check ``ln(e / (1 - lam_j)) >= 4 pi j - 1`` for ``j = 1..N`` in
    at least ``dps``-digit arithmetic (raised as needed so that ``1 - lam_j``
    is resolved) and return partial sums of
    ``(1 + j^2)^p (4 pi j - 1)^(-2p)``."""
    import mpmath

    lhs, rhs = [], []
    # 1 - lam_j ~ 4 exp(-4 pi j) must survive the subtraction
    dps = max(dps, int(4 * math.pi * N / math.log(10)) + 30)
    with mpmath.workdps(dps):
        for j in range(1, N + 1):
            gap = 1 - mpmath.tanh(2 * mpmath.pi * j) ** 2
            left = mpmath.log(mpmath.e / gap)
            right = 4 * mpmath.pi * j - 1
            if not left >= right:
                raise InequalityViolated(j)
            lhs.append(float(left))
            rhs.append(float(right))
    j = np.arange(1, n_terms + 1, dtype=float)
    terms = (1.0 + j**2) ** p * (4.0 * np.pi * j - 1.0) ** (-2.0 * p)
    return SobolevReport(p, lhs, rhs, np.cumsum(terms))
