"""Experiment definitions, the flat config format and run manifests."""

from __future__ import annotations

import dataclasses
import hashlib
import json
import math
import os
import platform
import time
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np

from .bvp import Dirichlet
from .errors import ConfigError
from .fixed_point import CauchyData, FixedPointOperator
from .geometry import Annulus, BoundaryFunction, Rectangle, build_grid, sample_boundary
from .iteration import (
    Discrepancy,
    IterationConfig,
    IterationRecord,
    MaxIterOnly,
    SegmentingSchedule,
    SuccessiveDiff,
    mann_mazya_run,
)
from .noise import NOISE_MODELS

__all__ = [
    "EXPERIMENTS",
    "ExperimentConfig",
    "parse_config",
    "emit_config",
    "load_config",
    "RunManifest",
    "Problem",
    "rectangle_problem",
    "annulus_problem",
    "iteration_config",
    "relative_trace_errors",
    "run_with_history",
    "log_grid",
]

EXPERIMENTS = ("rectangle", "annulus", "annulus_noisy", "oracle_rates", "semi_convergence")
RECT_HEIGHT = 0.75


def _default_eps_grid():
    return tuple(float(e) for e in np.logspace(-2, -5, 13))


@dataclass(frozen=True)
class ExperimentConfig:
    """All run parameters; every field has a default.

    ``n1``/``n2`` left as ``None`` pick the per-experiment grid: 257 x 193 on
    the rectangle (256 cells on the top side) and 65 x 512 on the annulus
    (512 nodes on the outer circle).
    """

    experiment: str = "rectangle"
    n1: Optional[int] = None
    n2: Optional[int] = None
    method: str = "direct"
    schedule: str = "harmonic"
    schedule_value: Optional[float] = None
    stop: str = "successive_diff"
    tol: float = 1e-3
    stop_norm: str = "l2"
    mu: float = 3.0
    eps: Optional[float] = None
    max_iter: int = 2000
    restart_every: Optional[int] = 50
    restart_steps: int = 500
    snapshots: Tuple[int, ...] = (5, 10, 25, 50)
    restart_snapshots: Tuple[int, ...] = (50, 100, 250, 500)
    noise_level: float = 0.05
    noise_model: str = "band_limited"
    smoothing_r: float = 2.0
    smooth: bool = True
    seed: int = 0
    modes: int = 50
    p_values: Tuple[float, ...] = (1.0, 2.0)
    eps_grid: Tuple[float, ...] = field(default_factory=_default_eps_grid)
    k_min: float = 100.0
    k_max: float = 10000.0
    n_k: int = 21
    curve_k_max: float = 1e17
    n_curve: int = 400
    out_dir: str = "results"

    def __post_init__(self):
        problems = []
        if self.experiment not in EXPERIMENTS:
            problems.append(f"experiment must be one of {EXPERIMENTS}, got {self.experiment!r}")
        for name in ("n1", "n2"):
            v = getattr(self, name)
            if v is not None and v < 3:
                problems.append(f"{name} must be at least 3")
        if self.stop not in ("successive_diff", "discrepancy", "max_iter"):
            problems.append(f"unknown stop rule {self.stop!r}")
        if self.schedule not in ("identity", "harmonic", "constant"):
            problems.append(f"unknown schedule {self.schedule!r}")
        if self.schedule == "constant" and not (self.schedule_value and 0 < self.schedule_value <= 1):
            problems.append("constant schedule needs schedule_value in (0, 1]")
        if self.mu <= 1:
            problems.append("mu must exceed 1")
        if self.max_iter < 1 or self.restart_steps < 1:
            problems.append("iteration counts must be positive")
        if self.restart_every is not None and self.restart_every < 1:
            problems.append("restart_every must be positive or null")
        if self.noise_model not in NOISE_MODELS:
            problems.append(f"unknown noise model {self.noise_model!r}")
        if self.noise_level < 0:
            problems.append("noise_level must be non-negative")
        if self.experiment == "oracle_rates" and len(self.eps_grid) == 0:
            problems.append("eps_grid must not be empty")
        if any(e <= 0 for e in self.eps_grid):
            problems.append("eps_grid entries must be positive")
        if problems:
            raise ConfigError("; ".join(problems))

    def grid_shape(self) -> Tuple[int, int]:
        if self.experiment == "rectangle":
            d = (257, 193)
        else:
            d = (65, 512)
        return (self.n1 or d[0], self.n2 or d[1])


_FIELDS = {f.name: f for f in dataclasses.fields(ExperimentConfig)}
_TUPLE_FIELDS = {"snapshots", "restart_snapshots", "p_values", "eps_grid"}
_INT_FIELDS = {"n1", "n2", "max_iter", "restart_every", "restart_steps", "seed", "modes", "n_k", "n_curve"}
_FLOAT_FIELDS = {"schedule_value", "tol", "mu", "eps", "noise_level", "smoothing_r", "k_min", "k_max",
                 "curve_k_max"}
_CHOICES = {
    "experiment": EXPERIMENTS,
    "method": ("direct", "cg"),
    "schedule": ("identity", "harmonic", "constant"),
    "stop": ("successive_diff", "discrepancy", "max_iter"),
    "stop_norm": ("l2", "star"),
    "noise_model": NOISE_MODELS,
}


def _coerce(key: str, value, lineno: Optional[int], line: Optional[str]):
    def bad(msg):
        return ConfigError(f"{key}: {msg}", line, lineno)

    if key in _TUPLE_FIELDS:
        if not isinstance(value, list):
            raise bad("expected a list")
        conv = int if key in ("snapshots", "restart_snapshots") else float
        try:
            return tuple(conv(v) for v in value)
        except (TypeError, ValueError):
            raise bad("list entries must be numbers") from None
    if value is None:
        if key in ("n1", "n2", "schedule_value", "eps", "restart_every"):
            return None
        raise bad("may not be null")
    if key in _INT_FIELDS:
        if isinstance(value, bool) or not isinstance(value, int):
            raise bad("expected an integer")
        return value
    if key in _FLOAT_FIELDS:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise bad("expected a number")
        return float(value)
    if key == "smooth":
        if not isinstance(value, bool):
            raise bad("expected true or false")
        return value
    if not isinstance(value, str):
        raise bad("expected a string")
    allowed = _CHOICES.get(key)
    if allowed is not None and value not in allowed:
        raise bad(f"must be one of {allowed}, got {value!r}")
    return value


def parse_config(text: str, **overrides) -> ExperimentConfig:
    """Parse ``key = value`` lines; values are JSON literals, bare words are strings.

    ``#`` starts a comment line. Keyword ``overrides`` are applied last.
    """
    values = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError("expected 'key = value'", raw, lineno)
        key, _, val = (s.strip() for s in line.partition("="))
        if key not in _FIELDS:
            raise ConfigError(f"unknown key {key!r}", raw, lineno)
        if key in values:
            raise ConfigError(f"duplicate key {key!r}", raw, lineno)
        try:
            parsed = json.loads(val)
        except json.JSONDecodeError:
            if val and all(c.isalnum() or c in "_-./" for c in val):
                parsed = val
            else:
                raise ConfigError(f"cannot parse value {val!r}", raw, lineno) from None
        values[key] = _coerce(key, parsed, lineno, raw)
    for key, val in overrides.items():
        if val is not None:
            values[key] = val
    return ExperimentConfig(**values)


def emit_config(cfg: ExperimentConfig) -> str:
    lines = []
    for name in _FIELDS:
        v = getattr(cfg, name)
        if isinstance(v, tuple):
            v = list(v)
        lines.append(f"{name} = {json.dumps(v)}")
    return "\n".join(lines) + "\n"


def load_config(path, **overrides) -> ExperimentConfig:
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config file: {exc}") from None
    return parse_config(text, **overrides)


def _sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def _version() -> str:
    try:
        from importlib.metadata import version

        return version("artifact")
    except Exception:
        return "unknown"


@dataclass
class RunManifest:
    """Provenance of one run: config echo, version, timings and file checksums."""

    config: str
    code_version: str = field(default_factory=_version)
    python: str = field(default_factory=platform.python_version)
    numpy: str = np.__version__
    started: float = field(default_factory=time.time)
    wall_clock: float = 0.0
    files: Dict[str, str] = field(default_factory=dict)
    info: Dict[str, object] = field(default_factory=dict)

    def add_file(self, path) -> None:
        self.files[os.path.basename(path)] = _sha256(path)

    def write(self, out_dir) -> str:
        self.wall_clock = time.time() - self.started
        path = os.path.join(out_dir, "manifest.json")
        with open(path, "w") as fh:
            json.dump(dataclasses.asdict(self), fh, indent=2, sort_keys=True)
            fh.write("\n")
        return path

    def verify(self, out_dir) -> List[str]:
        """Names of files whose checksum no longer matches."""
        return [n for n, h in self.files.items() if _sha256(os.path.join(out_dir, n)) != h]


# -- the two finite-difference problems ------------------------------------------------


@dataclass
class Problem:
    """A Cauchy problem with its operator and the exact traces on segment 2."""

    op: FixedPointOperator
    exact_flux: np.ndarray
    exact_trace: np.ndarray

    @property
    def params(self) -> np.ndarray:
        return self.op.segment.params


def rectangle_problem(n1: int = 129, n2: int = 97, method: str = "direct") -> Problem:
    """``f = sin(pi x)``, ``g = 0`` on the bottom side, zero Dirichlet on the sides.

    The solution is ``cosh(pi y) sin(pi x)``; on the top side ``y = 3/4`` its
    flux is ``pi sinh(3 pi / 4) sin(pi x)`` and its trace ``cosh(3 pi / 4) sin(pi x)``.
    """
    g = build_grid(Rectangle(1.0, RECT_HEIGHT), n1, n2)
    sides = {s: Dirichlet(BoundaryFunction.on(g, s, 0.0)) for s in (3, 4)}
    data = CauchyData(sample_boundary(g, 1, lambda x: np.sin(np.pi * x)), BoundaryFunction.on(g, 1, 0.0), sides)
    op = FixedPointOperator(g, data, method=method)
    x = op.segment.params
    flux = np.pi * np.sinh(np.pi * RECT_HEIGHT) * np.sin(np.pi * x)
    trace = np.cosh(np.pi * RECT_HEIGHT) * np.sin(np.pi * x)
    return Problem(op, flux, trace)


def annulus_problem(n1: int = 65, n2: int = 512, method: str = "direct") -> Problem:
    """Annulus ``1 < r < 3`` with solution ``(r + 1/r) sin(t) / 2 - (r^2 + r^-2) sin(2t) / 4``.

    On the inner circle ``f = sin t - sin(2t) / 2`` and ``g = 0``; on the
    outer circle the flux is ``4/9 sin t - 40/27 sin 2t`` and the trace
    ``5/3 sin t - 41/18 sin 2t``.
    """
    g = build_grid(Annulus(1.0, 3.0), n1, n2)
    data = CauchyData(sample_boundary(g, 1, lambda t: np.sin(t) - 0.5 * np.sin(2 * t)), BoundaryFunction.on(g, 1, 0.0))
    op = FixedPointOperator(g, data, method=method)
    t = op.segment.params
    flux = 4.0 / 9.0 * np.sin(t) - 40.0 / 27.0 * np.sin(2 * t)
    trace = 5.0 / 3.0 * np.sin(t) - 41.0 / 18.0 * np.sin(2 * t)
    return Problem(op, flux, trace)


def iteration_config(cfg: ExperimentConfig, eps: Optional[float] = None, max_iter: Optional[int] = None,
                     snapshots=None, restart_every: Optional[int] = None, stop: Optional[str] = None) -> IterationConfig:
    """Translate the experiment fields into an :class:`IterationConfig`."""
    schedule = SegmentingSchedule.from_name(cfg.schedule, cfg.schedule_value)
    kind = stop or cfg.stop
    if kind == "successive_diff":
        rule = SuccessiveDiff(cfg.tol, cfg.stop_norm)
    elif kind == "discrepancy":
        level = cfg.eps if eps is None else eps
        if level is None:
            raise ConfigError("discrepancy stop needs eps")
        rule = Discrepancy(cfg.mu, level)
    else:
        rule = MaxIterOnly()
    return IterationConfig(
        schedule=schedule,
        max_iter=max_iter or cfg.max_iter,
        stop=rule,
        restart_every=restart_every,
        snapshots=tuple(cfg.snapshots if snapshots is None else snapshots),
    )


def relative_trace_errors(problem: Problem, record: IterationRecord) -> List[Tuple[int, float, float]]:
    """``(k, flux error, trace error)`` relative in boundary L2 for each snapshot."""
    op = problem.op
    nf, nt = op.l2_norm(problem.exact_flux), op.l2_norm(problem.exact_trace)
    out = []
    for k in sorted(record.snapshots):
        phi = record.snapshots[k]
        trace = op._Ln(phi)
        out.append((k, op.l2_norm(phi - problem.exact_flux) / nf, op.l2_norm(trace - problem.exact_trace) / nt))
    return out


def run_with_history(problem: Problem, icfg: IterationConfig) -> IterationRecord:
    return mann_mazya_run(problem.op, np.zeros(problem.op.size), icfg, reference=problem.exact_flux)


def log_grid(k_min: float, k_max: float, n: int) -> np.ndarray:
    """Integer-valued log-spaced indices without duplicates."""
    return np.unique(np.round(np.logspace(math.log10(k_min), math.log10(k_max), n)))

