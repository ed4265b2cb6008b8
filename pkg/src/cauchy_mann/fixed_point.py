"""The affine fixed-point operator of the Cauchy problem and its energy metric.

For Cauchy data ``(f, g)`` on segment 1 the unknown Neumann trace on
segment 2 is a fixed point of ``T = L_d o L_n`` where

* ``L_n(phi)`` is the Dirichlet trace on segment 2 of the solution with
  ``u = f`` on segment 1 and ``u_nu = phi`` on segment 2;
* ``L_d(psi)`` is the conormal flux on segment 2 of the solution with
  ``u_nu = g`` on segment 1 and ``u = psi`` on segment 2.

Any further segments (the sides of the rectangle) carry the same extra
condition in both problems. ``T`` splits as ``T_l phi + z`` with ``z = T(0)``.

Segment-2 nodes that are Dirichlet in the ``L_n`` problem (rectangle corners)
are *inert*: input values there are ignored and outputs of ``L_d`` are zero.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Optional

import numpy as np
import scipy.linalg
import scipy.sparse.linalg as spla

from .bvp import CoefficientField, Condition, Dirichlet, MixedSolver, assemble_stiffness, energy_inner_product
from .geometry import BoundaryFunction, Grid

__all__ = [
    "CauchyData",
    "StarMetric",
    "FixedPointOperator",
    "apply_Ln",
    "apply_Ld",
    "apply_T",
    "linear_part",
    "affine_term",
    "star_norm",
    "star_inner",
    "dominant_eigenvalue",
]


@dataclass(frozen=True)
class CauchyData:
    f: BoundaryFunction
    g: BoundaryFunction
    extra_bc: Mapping[int, Condition] = field(default_factory=dict)

    def __post_init__(self):
        if self.f.segment != 1 or self.g.segment != 1 or len(self.f) != len(self.g):
            raise ValueError("Cauchy data f and g must both live on segment 1")

    def replace(self, f=None, g=None) -> "CauchyData":
        return CauchyData(self.f if f is None else f, self.g if g is None else g, self.extra_bc)


def _extra_kinds(extra_bc):
    return {seg: ("dirichlet" if isinstance(c, Dirichlet) else "neumann") for seg, c in extra_bc.items()}


class StarMetric:
    """Energy inner product on Neumann traces of segment 2.

    ``<phi, psi>_* = integral grad W(phi) . grad W(psi)`` where ``W(phi)``
    vanishes on segment 1, has flux ``phi`` on segment 2 and homogeneous
    extra conditions elsewhere.
    """

    def __init__(self, grid: Grid, extra_kinds: Mapping[int, str] = None,
                 coefficients: CoefficientField = CoefficientField(), solver: MixedSolver = None,
                 method: str = "direct"):
        if solver is None:
            kinds = {1: "dirichlet", 2: "neumann", **dict(extra_kinds or {})}
            solver = MixedSolver(grid, kinds, coefficients, method=method)
        self.grid = grid
        self.solver = solver
        self.segment = grid.segment(2)
        self.active = solver.neumann_mask(2)

    def _values(self, phi):
        return phi.values if isinstance(phi, BoundaryFunction) else np.asarray(phi, dtype=float)

    def lift(self, phi):
        """The harmonic lifting ``W(phi)`` as a :class:`DiscreteSolution`."""
        return self.solver.solve({2: self._values(phi)})

    def inner(self, phi, psi) -> float:
        x, y = self._values(phi), self._values(psi)
        w = self.solver.solve({2: y}).values[self.segment.nodes]
        return float(np.sum((self.segment.weights * x * w)[self.active]))

    def norm(self, phi) -> float:
        return float(np.sqrt(max(self.inner(phi, phi), 0.0)))

    def gram(self) -> np.ndarray:
        """Dense Gram matrix on the active nodes (coarse grids only)."""
        idx = np.flatnonzero(self.active)
        n = len(self.segment)
        G = np.empty((len(idx), len(idx)))
        for c, i in enumerate(idx):
            e = np.zeros(n)
            e[i] = 1.0
            w = self.solver.solve({2: e}).values[self.segment.nodes]
            G[:, c] = (self.segment.weights * w)[idx]
        return 0.5 * (G + G.T)


def star_norm(m: StarMetric, phi) -> float:
    return m.norm(phi)


def star_inner(m: StarMetric, phi, psi) -> float:
    """Inner product computed literally as the energy of the two liftings."""
    return energy_inner_product(m.lift(phi), m.lift(psi))


class FixedPointOperator:
    """``T = L_d o L_n`` on a fixed grid with both mixed problems factorised once.

    Besides the :class:`BoundaryFunction` API the operator exposes the
    array-level protocol used by the iteration engine: :meth:`T`,
    :meth:`T_linear`, :meth:`norm`, :meth:`inner`, :meth:`l2_norm`.
    """

    def __init__(self, grid: Grid, data: CauchyData, coefficients: CoefficientField = CoefficientField(),
                 method: str = "direct"):
        extra = dict(data.extra_bc)
        missing = set(grid.segments) - {1, 2} - set(extra)
        if missing:
            raise ValueError(f"segments {sorted(missing)} need an extra boundary condition")
        kinds_x = _extra_kinds(extra)
        K = assemble_stiffness(grid, coefficients)
        self.grid = grid
        self.data = data
        self.coefficients = coefficients
        self.solver_n = MixedSolver(grid, {1: "dirichlet", 2: "neumann", **kinds_x}, coefficients, method, K=K)
        self.solver_d = MixedSolver(grid, {1: "neumann", 2: "dirichlet", **kinds_x}, coefficients, method, K=K)
        self.metric = StarMetric(grid, solver=self.solver_n)
        self.segment = grid.segment(2)
        self.active = self.metric.active
        self._extra_data = {seg: c.data for seg, c in extra.items()}
        self._z = None

        wsum = np.zeros(grid.n_nodes)
        for s in grid.segments.values():
            np.add.at(wsum, s.nodes, s.weights)
        self._flux_scale = wsum[self.segment.nodes]

    @property
    def size(self) -> int:
        return len(self.segment)

    def wrap(self, values) -> BoundaryFunction:
        s = self.segment
        return BoundaryFunction(2, np.asarray(values, dtype=float), s.weights, s.params)

    def zeros(self) -> BoundaryFunction:
        return self.wrap(np.zeros(self.size))

    # -- array level ----------------------------------------------------------

    def _Ln(self, x, homogeneous=False):
        data = {2: x}
        if not homogeneous:
            data.update(self._extra_data)
            data[1] = self.data.f.values
        return self.solver_n.solve(data).values[self.segment.nodes]

    def _Ld(self, y, homogeneous=False):
        data = {2: y}
        if not homogeneous:
            data.update(self._extra_data)
            data[1] = self.data.g.values
        sol = self.solver_d.solve(data)
        flux = (self.solver_d.K @ sol.values)[self.segment.nodes] / self._flux_scale
        return np.where(self.active, flux, 0.0)

    def T(self, x: np.ndarray) -> np.ndarray:
        return self._Ld(self._Ln(x))

    def T_linear(self, x: np.ndarray) -> np.ndarray:
        return self._Ld(self._Ln(x, True), True)

    @property
    def z(self) -> np.ndarray:
        if self._z is None:
            self._z = self.T(np.zeros(self.size))
        return self._z

    def norm(self, x) -> float:
        return self.metric.norm(x)

    def inner(self, x, y) -> float:
        return self.metric.inner(x, y)

    def l2_norm(self, x) -> float:
        return float(np.sqrt(np.sum(self.segment.weights * np.asarray(x) ** 2)))

    # -- boundary-function level ----------------------------------------------

    def apply_Ln(self, phi: BoundaryFunction) -> BoundaryFunction:
        return self.wrap(self._Ln(phi.values))

    def apply_Ld(self, psi: BoundaryFunction) -> BoundaryFunction:
        return self.wrap(self._Ld(psi.values))

    def __call__(self, phi: BoundaryFunction) -> BoundaryFunction:
        return self.wrap(self.T(phi.values))

    apply = __call__

    def apply_linear(self, phi: BoundaryFunction) -> BoundaryFunction:
        return self.wrap(self.T_linear(phi.values))

    def affine_term(self) -> BoundaryFunction:
        return self.wrap(self.z)

    def with_data(self, data: CauchyData) -> "FixedPointOperator":
        """Same grid and factorisations, different Cauchy data."""
        new = object.__new__(FixedPointOperator)
        new.__dict__.update(self.__dict__)
        new.data = data
        new._extra_data = {seg: c.data for seg, c in data.extra_bc.items()}
        new._z = None
        return new

    # -- diagnostics ------------------------------------------------------------

    def linear_operator(self) -> spla.LinearOperator:
        n = self.size
        return spla.LinearOperator((n, n), matvec=self.T_linear, dtype=float)

    def linear_matrix(self) -> np.ndarray:
        """Dense matrix of ``T_l`` (columns of inert nodes are zero)."""
        n = self.size
        M = np.zeros((n, n))
        for i in np.flatnonzero(self.active):
            e = np.zeros(n)
            e[i] = 1.0
            M[:, i] = self.T_linear(e)
        return M

    def spectrum(self) -> np.ndarray:
        """Eigenvalues of ``T_l`` on the active nodes, ascending.

        ``T_l`` is self-adjoint in the star inner product, so this is a
        symmetric-definite generalised problem ``G T v = lam G v``.
        """
        idx = np.flatnonzero(self.active)
        G = self.metric.gram()
        M = self.linear_matrix()[np.ix_(idx, idx)]
        A = G @ M
        return scipy.linalg.eigh(0.5 * (A + A.T), 0.5 * (G + G.T), eigvals_only=True)


def apply_Ln(op: FixedPointOperator, phi: BoundaryFunction) -> BoundaryFunction:
    return op.apply_Ln(phi)


def apply_Ld(op: FixedPointOperator, psi: BoundaryFunction) -> BoundaryFunction:
    return op.apply_Ld(psi)


def apply_T(op: FixedPointOperator, phi: BoundaryFunction) -> BoundaryFunction:
    return op(phi)


def linear_part(op: FixedPointOperator):
    """Callable ``phi -> T_l phi`` on boundary functions."""
    return op.apply_linear


def affine_term(op: FixedPointOperator) -> BoundaryFunction:
    return op.affine_term()


def dominant_eigenvalue(op, iters: int = 200, seed: Optional[int] = 0, tol: float = 1e-12) -> float:
    """Power iteration for the largest eigenvalue of ``T_l`` in the operator's norm."""
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(op.size)
    x = x / op.norm(x)
    lam = 0.0
    for _ in range(iters):
        y = op.T_linear(x)
        new = op.inner(x, y)
        x = y / op.norm(y)
        if abs(new - lam) <= tol * abs(new):
            lam = new
            break
        lam = new
    return float(lam)
