"""Segmenting Mann iteration for affine fixed-point operators.

A segmenting matrix is fixed by its diagonal ``d_k``; the averaged iterate
obeys ``v_{k+1} = (1 - d_k) v_k + d_k T(v_k)`` and the raw iterates are
``x_{k+1} = T(v_k)``. ``d_k = 1`` is the plain Picard (Maz'ya) iteration and
``d_k = 1/(k+1)`` is the running mean of all raw iterates.

The engine works on any object exposing the array-level protocol

``T(x)``, ``T_linear(x)``, ``norm(x)``, ``inner(x, y)``, ``l2_norm(x)``, ``size``

which both :class:`~cauchy_mann.fixed_point.FixedPointOperator` and
:class:`~cauchy_mann.spectral.SpectralOperator` implement.
"""

from __future__ import annotations

import csv
import io
import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Union

import numpy as np

from .errors import NoConvergence
from .geometry import BoundaryFunction

__all__ = [
    "SegmentingSchedule",
    "segmenting_matrix",
    "SuccessiveDiff",
    "Discrepancy",
    "MaxIterOnly",
    "IterationConfig",
    "IterationRecord",
    "mann_mazya_run",
    "restart_run",
    "discrepancy_stop",
    "discrepancy_index",
    "regularized_reconstruct",
    "CSV_COLUMNS",
]


@dataclass(frozen=True)
class SegmentingSchedule:
    """Diagonal ``k -> d_k`` (``k >= 1``) of a segmenting matrix."""

    kind: str
    func: Callable[[int], float]
    diverges: Optional[bool] = None
    value: Optional[float] = None

    def __call__(self, k: int) -> float:
        d = float(self.func(k))
        if not 0.0 <= d <= 1.0:
            raise ValueError(f"schedule produced d_{k} = {d} outside [0, 1]")
        return d

    @classmethod
    def identity(cls) -> "SegmentingSchedule":
        return cls("identity", lambda k: 1.0, diverges=False)

    @classmethod
    def harmonic(cls) -> "SegmentingSchedule":
        return cls("harmonic", lambda k: 1.0 / (k + 1), diverges=True)

    @classmethod
    def constant(cls, c: float) -> "SegmentingSchedule":
        if not 0.0 <= c <= 1.0:
            raise ValueError(f"constant schedule needs c in [0, 1], got {c}")
        return cls("constant", lambda k: c, diverges=0.0 < c < 1.0, value=c)

    @classmethod
    def custom(cls, func: Callable[[int], float], diverges: Optional[bool] = None) -> "SegmentingSchedule":
        return cls("custom", func, diverges=diverges)

    @classmethod
    def from_name(cls, name: str, value: Optional[float] = None) -> "SegmentingSchedule":
        if name == "identity":
            return cls.identity()
        if name == "harmonic":
            return cls.harmonic()
        if name == "constant":
            return cls.constant(0.5 if value is None else value)
        raise ValueError(f"unknown schedule {name!r}")


def segmenting_matrix(schedule: SegmentingSchedule, n: int) -> np.ndarray:
    """Lower-triangular ``n x n`` matrix generated by ``a_{k+1,k+1} = d_k`` and
    ``a_{k+1,j} = (1 - d_k) a_{k,j}``."""
    A = np.zeros((n, n))
    A[0, 0] = 1.0
    for k in range(1, n):
        d = schedule(k)
        A[k, :k] = (1.0 - d) * A[k - 1, :k]
        A[k, k] = d
    return A


@dataclass(frozen=True)
class SuccessiveDiff:
    """Stop when ``||v_k - v_{k-1}|| <= tol`` for the averaged iterates."""

    tol: float
    norm: str = "l2"

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError("tolerance must be positive")
        if self.norm not in ("l2", "star"):
            raise ValueError(f"unknown norm {self.norm!r}")


@dataclass(frozen=True)
class Discrepancy:
    """Stop at the first ``k`` with ``||z - (I - T_l) v_k|| <= mu * eps``."""

    mu: float
    eps: float
    norm: str = "star"

    def __post_init__(self):
        if not self.mu > 1:
            raise ValueError(f"discrepancy principle needs mu > 1, got {self.mu}")
        if not self.eps > 0:
            raise ValueError("noise level must be positive")
        if self.norm not in ("l2", "star"):
            raise ValueError(f"unknown norm {self.norm!r}")
        if self.mu <= 2:
            warnings.warn(f"mu={self.mu} <= 2: logarithmic rate guarantees need mu > 2", stacklevel=3)


@dataclass(frozen=True)
class MaxIterOnly:
    pass


@dataclass(frozen=True)
class IterationConfig:
    schedule: SegmentingSchedule = field(default_factory=SegmentingSchedule.harmonic)
    max_iter: int = 1000
    stop: Union[SuccessiveDiff, Discrepancy, MaxIterOnly] = MaxIterOnly()
    restart_every: Optional[int] = None
    record_every: int = 1
    snapshots: tuple = ()
    keep_raw: bool = False
    strict: bool = False

    def __post_init__(self):
        if self.max_iter < 1:
            raise ValueError("max_iter must be at least 1")
        if self.restart_every is not None and self.restart_every < 1:
            raise ValueError("restart_every must be at least 1")
        if self.record_every < 1:
            raise ValueError("record_every must be at least 1")


CSV_COLUMNS = ("k", "residual_star", "residual_l2", "diff_l2", "err_star", "err_l2", "restart_flag")


@dataclass
class IterationRecord:
    """History of one run. Iterates are the averaged ones unless stated."""

    k: List[int] = field(default_factory=list)
    residual_star: List[float] = field(default_factory=list)
    residual_l2: List[float] = field(default_factory=list)
    diff_l2: List[float] = field(default_factory=list)
    err_star: List[float] = field(default_factory=list)
    err_l2: List[float] = field(default_factory=list)
    restart_flag: List[int] = field(default_factory=list)
    snapshots: Dict[int, np.ndarray] = field(default_factory=dict)
    raw: Dict[int, np.ndarray] = field(default_factory=dict)
    stop_reason: str = ""
    stop_index: int = 0
    final: Optional[np.ndarray] = None
    final_raw: Optional[np.ndarray] = None

    @property
    def converged(self) -> bool:
        return self.stop_reason in ("discrepancy", "successive_diff")

    def rows(self):
        for i in range(len(self.k)):
            yield tuple(getattr(self, c)[i] for c in CSV_COLUMNS)

    def to_csv(self, path=None) -> str:
        """Write the history as CSV; returns the text. Floats use ``repr``."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for row in self.rows():
            w.writerow([_fmt(v) for v in row])
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", newline="") as fh:
                fh.write(text)
        return text


def _fmt(v):
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    v = float(v)
    return "nan" if math.isnan(v) else repr(v)


def _as_array(x):
    return x.values if isinstance(x, BoundaryFunction) else np.asarray(x, dtype=float)


def discrepancy_stop(residual_norm: float, mu: float, eps: float) -> bool:
    """The discrepancy test ``residual <= mu * eps`` (ties stop)."""
    return residual_norm <= mu * eps


def discrepancy_index(residuals, mu: float, eps: float, start: int = 1) -> Optional[int]:
    """First index (counting from ``start``) whose residual passes the test."""
    hits = np.flatnonzero(np.asarray(residuals) <= mu * eps)
    return int(hits[0]) + start if len(hits) else None


def mann_mazya_run(op, phi1, cfg: IterationConfig = IterationConfig(), reference=None) -> IterationRecord:
    """Run the segmenting Mann iteration of ``op`` from ``phi1``.

    At step ``k`` the residual ``T(v_k) - v_k`` is evaluated and tested first;
    the successive-difference rule is tested after the update. With
    ``cfg.restart_every = m`` the averaging restarts every ``m`` steps from the
    latest raw iterate.
    """
    sched = cfg.schedule
    stop = cfg.stop
    ref = None if reference is None else _as_array(reference)
    snaps = set(cfg.snapshots)
    rec = IterationRecord()

    v = _as_array(phi1).copy()
    k, s = 1, 1
    restarted = 0
    diff = math.nan
    if cfg.keep_raw:
        rec.raw[1] = v.copy()

    while True:
        t = op.T(v)
        r = t - v
        res_star = op.norm(r)
        if k % cfg.record_every == 0 or k == 1:
            _record(rec, op, k, res_star, r, diff, v, ref, restarted)
            restarted = 0
        if k in snaps:
            rec.snapshots[k] = v.copy()

        if isinstance(stop, Discrepancy):
            res = res_star if stop.norm == "star" else op.l2_norm(r)
            if discrepancy_stop(res, stop.mu, stop.eps):
                return _finish(rec, op, "discrepancy", k, res_star, r, diff, v, t, ref, cfg)
        if k >= cfg.max_iter:
            rec = _finish(rec, op, "max_iter", k, res_star, r, diff, v, t, ref, cfg)
            if cfg.strict and not isinstance(stop, MaxIterOnly):
                raise NoConvergence(cfg.max_iter, rec)
            return rec

        if cfg.restart_every is not None and s == cfg.restart_every:
            new = t
            s = 1
            restarted = 1
        else:
            d = sched(s)
            new = (1.0 - d) * v + d * t
            s += 1
        if cfg.keep_raw:
            rec.raw[k + 1] = t.copy()
        step = new - v
        diff = op.l2_norm(step)
        v = new
        k += 1

        if isinstance(stop, SuccessiveDiff):
            dn = diff if stop.norm == "l2" else op.norm(step)
            if dn <= stop.tol:
                t = op.T(v)
                r = t - v
                res_star = op.norm(r)
                if k in snaps:
                    rec.snapshots[k] = v.copy()
                return _finish(rec, op, "successive_diff", k, res_star, r, diff, v, t, ref, cfg,
                               restarted=restarted)


def _record(rec, op, k, res_star, r, diff, v, ref, restarted):
    rec.k.append(k)
    rec.residual_star.append(res_star)
    rec.residual_l2.append(op.l2_norm(r))
    rec.diff_l2.append(diff)
    if ref is None:
        rec.err_star.append(math.nan)
        rec.err_l2.append(math.nan)
    else:
        rec.err_star.append(op.norm(v - ref))
        rec.err_l2.append(op.l2_norm(v - ref))
    rec.restart_flag.append(restarted)


def _finish(rec, op, reason, k, res_star, r, diff, v, t, ref, cfg, restarted=0):
    if not rec.k or rec.k[-1] != k:
        _record(rec, op, k, res_star, r, diff, v, ref, restarted)
    rec.stop_reason = reason
    rec.stop_index = k
    rec.final = v.copy()
    rec.final_raw = t.copy()
    if k in set(cfg.snapshots):
        rec.snapshots[k] = v.copy()
    return rec


def restart_run(op, phi1, cfg: IterationConfig, restart_every: int, reference=None) -> IterationRecord:
    """:func:`mann_mazya_run` with the averaging restarted every ``restart_every`` steps."""
    if restart_every < 1:
        raise ValueError("restart_every must be at least 1")
    cfg = IterationConfig(cfg.schedule, cfg.max_iter, cfg.stop, restart_every, cfg.record_every,
                          cfg.snapshots, cfg.keep_raw, cfg.strict)
    return mann_mazya_run(op, phi1, cfg, reference)


def regularized_reconstruct(T_linear: Callable, z, phi, k: int,
                            schedule: SegmentingSchedule = SegmentingSchedule.harmonic(),
                            which: str = "raw"):
    """``k``-th iterate of the segmenting iteration for ``x -> T_linear(x) + z``
    started at ``phi``.

    ``which='raw'`` returns ``x_k`` (so ``k=1`` gives ``phi``); ``'averaged'``
    returns ``v_k``.
    """
    if k < 1:
        raise ValueError("k must be at least 1")
    zv = _as_array(z)
    v = _as_array(phi).copy()
    x = v.copy()
    for j in range(1, k):
        x = T_linear(v) + zv
        d = schedule(j)
        v = (1.0 - d) * v + d * x
    out = x if which == "raw" else v
    if isinstance(phi, BoundaryFunction):
        return phi.with_values(out)
    return out
