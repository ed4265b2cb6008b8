"""Discrete mixed boundary value problems for ``-div(A grad u) = 0``.

The stiffness matrix is the bilinear-element energy form on the logical grid
with nodal (trapezoid) quadrature, which reduces to the classical 5-point
stencil on the rectangle and to the polar 5-point stencil with ``1/r`` metric
terms on the annulus. Neumann data enter as boundary loads ``w_i g_i``; this
is equivalent to ghost-node elimination and keeps the system symmetric.

The conormal flux of a computed solution is recovered from the residual of
the weak form, ``(K u)_i / w_i``, so that imposing Neumann data ``g`` and
reading the flux back returns ``g`` exactly.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Dict, Mapping, Optional, Union

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import GridMismatch, SingularSystem, SolverDivergence
from .geometry import Annulus, BoundaryFunction, Grid

__all__ = [
    "CoefficientField",
    "Dirichlet",
    "Neumann",
    "MixedBvpSpec",
    "DiscreteSolution",
    "MixedSolver",
    "assemble_stiffness",
    "solve_mixed",
    "dirichlet_trace",
    "conormal_flux",
    "energy_inner_product",
]

Coef = Union[float, Callable[[np.ndarray, np.ndarray], np.ndarray]]


def _evaluate(c: Coef, x, y):
    if callable(c):
        return np.broadcast_to(np.asarray(c(x, y), dtype=float), np.shape(x))
    return np.full(np.shape(x), float(c))


@dataclass(frozen=True)
class CoefficientField:
    """Symmetric coefficient matrix ``A(x, y) = [[a11, a12], [a12, a22]]``.

    Entries are constants or vectorised callables of the physical coordinates.
    """

    a11: Coef = 1.0
    a12: Coef = 0.0
    a22: Coef = 1.0
    alpha: float = 1.0

    @classmethod
    def laplace(cls) -> "CoefficientField":
        return cls()

    @property
    def is_laplace(self) -> bool:
        return not any(callable(c) for c in (self.a11, self.a12, self.a22)) and (
            (self.a11, self.a12, self.a22) == (1.0, 0.0, 1.0)
        )

    def matrix(self, x, y):
        return _evaluate(self.a11, x, y), _evaluate(self.a12, x, y), _evaluate(self.a22, x, y)

    def min_eigenvalue(self, grid: Grid) -> float:
        a11, a12, a22 = self.matrix(grid.x, grid.y)
        mean = 0.5 * (a11 + a22)
        rad = np.sqrt((0.5 * (a11 - a22)) ** 2 + a12**2)
        return float(np.min(mean - rad))

    def check(self, grid: Grid) -> None:
        lam = self.min_eigenvalue(grid)
        if not lam >= self.alpha:
            raise ValueError(f"coefficient field not elliptic with alpha={self.alpha}: min eigenvalue {lam}")


@dataclass(frozen=True)
class Dirichlet:
    data: BoundaryFunction


@dataclass(frozen=True)
class Neumann:
    data: BoundaryFunction


Condition = Union[Dirichlet, Neumann]


@dataclass(frozen=True)
class MixedBvpSpec:
    grid: Grid
    bc: Mapping[int, Condition]
    coefficients: CoefficientField = CoefficientField()

    def kinds(self) -> Dict[int, str]:
        return {seg: ("dirichlet" if isinstance(c, Dirichlet) else "neumann") for seg, c in self.bc.items()}


def _logical_metric(grid: Grid, coeffs: CoefficientField, xi, eta):
    """Energy tensor in logical coordinates, ``det(J) J^-1 A J^-T``."""
    if isinstance(grid.domain, Annulus):
        r, th = xi, eta
        x, y = r * np.cos(th), r * np.sin(th)
        a11, a12, a22 = coeffs.matrix(x, y)
        c, s = np.cos(th), np.sin(th)
        # J^-1 = [[c, s], [-s/r, c/r]], det J = r
        b11 = r * (c * c * a11 + 2 * c * s * a12 + s * s * a22)
        b12 = -s * c * a11 + (c * c - s * s) * a12 + s * c * a22
        b22 = (s * s * a11 - 2 * s * c * a12 + c * c * a22) / r
        return b11, b12, b22
    return coeffs.matrix(xi, eta)


def assemble_stiffness(grid: Grid, coeffs: CoefficientField = CoefficientField()) -> sp.csr_matrix:
    """Symmetric positive semi-definite stiffness matrix of the energy form.

    Each logical cell contributes half of every edge term, with the diagonal
    metric entries sampled at edge midpoints; cross terms use the cell centre.
    Raises ``ValueError`` if the coefficients are not uniformly elliptic on
    the grid nodes.
    """
    if not coeffs.is_laplace:
        coeffs.check(grid)
    n1, n2 = grid.n1, grid.n2
    h1, h2 = grid.h1, grid.h2
    ncell2 = n2 if grid.periodic else n2 - 1
    i = np.repeat(np.arange(n1 - 1), ncell2)
    j = np.tile(np.arange(ncell2), n1 - 1)
    jp = (j + 1) % n2
    p00, p10 = i * n2 + j, (i + 1) * n2 + j
    p01, p11 = i * n2 + jp, (i + 1) * n2 + jp

    xi_mid = 0.5 * (grid.xi[i] + grid.xi[i + 1])
    eta0 = grid.eta[j]
    eta1 = eta0 + h2
    eta_mid = eta0 + 0.5 * h2

    rows, cols, vals = [], [], []

    def edge(a, b, c):
        rows.extend((a, b, a, b))
        cols.extend((a, b, b, a))
        vals.extend((c, c, -c, -c))

    # xi-direction edges (bottom and top of the cell)
    for pa, pb, et in ((p00, p10, eta0), (p01, p11, eta1)):
        b11, _, _ = _logical_metric(grid, coeffs, xi_mid, et)
        edge(pa, pb, 0.5 * b11 * h2 / h1)
    # eta-direction edges (left and right of the cell)
    for pa, pb, xv in ((p00, p01, grid.xi[i]), (p10, p11, grid.xi[i + 1])):
        _, _, b22 = _logical_metric(grid, coeffs, xv, eta_mid)
        edge(pa, pb, 0.5 * b22 * h1 / h2)

    _, b12, _ = _logical_metric(grid, coeffs, xi_mid, eta_mid)
    if np.any(b12 != 0.0):
        g = np.array([-1.0, 1.0, -1.0, 1.0]) / (2.0 * h1)
        q = np.array([-1.0, -1.0, 1.0, 1.0]) / (2.0 * h2)
        local = np.outer(g, q) + np.outer(q, g)
        corners = (p00, p10, p01, p11)
        scale = b12 * h1 * h2
        for a in range(4):
            for b in range(4):
                if local[a, b] != 0.0:
                    rows.append(corners[a])
                    cols.append(corners[b])
                    vals.append(scale * local[a, b])

    n = grid.n_nodes
    K = sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n)
    ).tocsr()
    K.sum_duplicates()
    return K


class MixedSolver:
    """Factorised mixed problem for a fixed assignment of condition types.

    The factorisation depends only on which segments are Dirichlet, so one
    instance serves any number of right-hand sides. Dirichlet wins at nodes
    shared by two segments; if both are Dirichlet the owning segment's value
    is used.
    """

    def __init__(
        self,
        grid: Grid,
        kinds: Mapping[int, str],
        coefficients: CoefficientField = CoefficientField(),
        method: str = "direct",
        rtol: float = 1e-12,
        K: Optional[sp.csr_matrix] = None,
    ):
        for seg in grid.segments:
            if seg not in kinds:
                raise ValueError(f"segment {seg} has no boundary condition")
        if "dirichlet" not in kinds.values():
            raise SingularSystem("mixed problem needs at least one Dirichlet segment")
        self.grid = grid
        self.kinds = dict(kinds)
        self.coefficients = coefficients
        self.method = method
        self.rtol = rtol
        self.K = assemble_stiffness(grid, coefficients) if K is None else K

        dmask = np.zeros(grid.n_nodes, dtype=bool)
        for seg, kind in self.kinds.items():
            if kind == "dirichlet":
                dmask[grid.segment(seg).nodes] = True
        self.dirichlet = np.flatnonzero(dmask)
        self.free = np.flatnonzero(~dmask)
        self._dmask = dmask
        self.K_ff = self.K[self.free][:, self.free].tocsc()
        self.K_fd = self.K[self.free][:, self.dirichlet].tocsc()
        if method == "direct":
            self._lu = spla.splu(self.K_ff)
        elif method == "cg":
            d = self.K_ff.diagonal()
            self._precond = spla.LinearOperator(self.K_ff.shape, matvec=lambda v: v / d)
        else:
            raise ValueError(f"unknown linear solver {method!r}")

    def neumann_mask(self, seg: int) -> np.ndarray:
        """True for nodes of ``seg`` whose value is an unknown of the system."""
        return ~self._dmask[self.grid.segment(seg).nodes]

    def _solve_free(self, rhs: np.ndarray) -> np.ndarray:
        if self.method == "direct":
            return self._lu.solve(rhs)
        nrm = np.linalg.norm(rhs)
        if nrm == 0.0:
            return np.zeros_like(rhs)
        sol, info = spla.cg(self.K_ff, rhs, rtol=self.rtol, atol=0.0, M=self._precond, maxiter=20 * len(rhs))
        if info != 0 or np.linalg.norm(self.K_ff @ sol - rhs) > 10 * self.rtol * nrm:
            raise SolverDivergence(f"conjugate gradients failed to reach rtol={self.rtol} (info={info})")
        return sol

    def solve(self, data: Mapping[int, BoundaryFunction]) -> "DiscreteSolution":
        """Solve with ``data[seg]`` as Dirichlet values or Neumann fluxes per ``kinds``.

        Missing segments get homogeneous data.
        """
        grid = self.grid
        u = np.zeros(grid.n_nodes)
        load = np.zeros(grid.n_nodes)
        for seg, kind in self.kinds.items():
            if kind != "dirichlet" or seg not in data:
                continue
            s = grid.segment(seg)
            vals = np.asarray(_values(data[seg], len(s)))
            # segments that don't own a shared node only fill it if nobody owns it with Dirichlet
            own = grid.owner[s.nodes] == seg
            foreign_owner = grid.owner[s.nodes[~own]]
            fill = own.copy()
            fill[~own] = [self.kinds.get(o) != "dirichlet" for o in foreign_owner]
            u[s.nodes[fill]] = vals[fill]
        for seg, kind in self.kinds.items():
            if kind != "neumann" or seg not in data:
                continue
            s = grid.segment(seg)
            vals = np.asarray(_values(data[seg], len(s)))
            np.add.at(load, s.nodes, s.weights * vals)
        rhs = load[self.free] - self.K_fd @ u[self.dirichlet]
        u[self.free] = self._solve_free(rhs)
        return DiscreteSolution(grid, u, self, load)


def _values(v, n):
    vals = v.values if isinstance(v, BoundaryFunction) else np.broadcast_to(np.asarray(v, float), (n,))
    if len(vals) != n:
        raise ValueError(f"boundary data has {len(vals)} samples, segment has {n} nodes")
    return vals


@dataclass(frozen=True, eq=False)
class DiscreteSolution:
    grid: Grid
    values: np.ndarray
    solver: MixedSolver
    load: np.ndarray

    @property
    def stiffness(self) -> sp.csr_matrix:
        return self.solver.K

    def nodal(self) -> np.ndarray:
        """Values reshaped to ``(n1, n2)``."""
        return self.values.reshape(self.grid.n1, self.grid.n2)

    def interior_residual(self) -> float:
        """Relative residual of the discrete equations at the unknown nodes."""
        free = self.solver.free
        r = (self.solver.K @ self.values - self.load)[free]
        scale = np.linalg.norm(self.load[free]) + np.linalg.norm(self.solver.K_fd @ self.values[self.solver.dirichlet])
        return float(np.linalg.norm(r) / scale) if scale > 0 else float(np.linalg.norm(r))


def solve_mixed(spec: MixedBvpSpec, method: str = "direct") -> DiscreteSolution:
    solver = MixedSolver(spec.grid, spec.kinds(), spec.coefficients, method=method)
    return solver.solve({seg: c.data for seg, c in spec.bc.items()})


def dirichlet_trace(sol: DiscreteSolution, seg: int) -> BoundaryFunction:
    s = sol.grid.segment(seg)
    return BoundaryFunction(seg, sol.values[s.nodes].copy(), s.weights, s.params)


def conormal_flux(sol: DiscreteSolution, seg: int) -> BoundaryFunction:
    """Consistent conormal derivative ``(A grad u) . nu`` on ``seg``.

    At a node shared with another segment the residual is divided by the sum
    of both segments' weights, i.e. the flux is averaged over the two
    half-edges.
    """
    grid = sol.grid
    s = grid.segment(seg)
    residual = sol.solver.K @ sol.values
    wsum = np.zeros(grid.n_nodes)
    for other in grid.segments.values():
        np.add.at(wsum, other.nodes, other.weights)
    flux = residual[s.nodes] / wsum[s.nodes]
    return BoundaryFunction(seg, flux, s.weights, s.params)


def energy_inner_product(u: DiscreteSolution, v: DiscreteSolution) -> float:
    """Discrete ``integral of A grad u . grad v``, i.e. ``u^T K v``."""
    if u.grid is not v.grid or u.solver.coefficients != v.solver.coefficients:
        raise GridMismatch("solutions live on different grids or coefficient fields")
    return float(u.values @ (u.solver.K @ v.values))
