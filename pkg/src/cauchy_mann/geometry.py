"""Computational domains, structured grids and sampled boundary functions.

Two domains are supported:

* :class:`Rectangle` ``(0, width) x (0, height)`` with segments
  1 (bottom, y=0), 2 (top, y=height), 3 (left, x=0) and 4 (right, x=width);
* :class:`Annulus` centred at the origin with segments 1 (inner circle)
  and 2 (outer circle).

Grids are uniform tensor grids in logical coordinates ``(xi, eta)``: ``(x, y)``
for the rectangle and ``(r, theta)`` for the annulus. Nodes are flattened as
``p = i * n2 + j`` where ``i`` indexes ``xi`` and ``j`` indexes ``eta``. The
angular direction of the annulus is periodic and the seam node is stored once.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Dict, Union

import numpy as np
import scipy.fft

from .errors import InvalidDomain, TooCoarse, UnknownSegment

__all__ = [
    "Rectangle",
    "Annulus",
    "Domain",
    "Segment",
    "Grid",
    "BoundaryFunction",
    "build_grid",
    "sample_boundary",
    "boundary_l2_norm",
    "boundary_modes",
    "from_boundary_modes",
    "boundary_sobolev_norm",
]


@dataclass(frozen=True)
class Rectangle:
    width: float
    height: float

    def __post_init__(self):
        if not (self.width > 0 and self.height > 0):
            raise InvalidDomain(f"rectangle needs positive sides, got {self.width}x{self.height}")

    @property
    def boundary_segments(self):
        return (1, 2, 3, 4)


@dataclass(frozen=True)
class Annulus:
    inner_radius: float
    outer_radius: float

    def __post_init__(self):
        if not (0 < self.inner_radius < self.outer_radius):
            raise InvalidDomain(
                f"annulus needs 0 < inner < outer, got {self.inner_radius}, {self.outer_radius}"
            )

    @property
    def boundary_segments(self):
        return (1, 2)


Domain = Union[Rectangle, Annulus]


@dataclass(frozen=True, eq=False)
class Segment:
    """Node list of one boundary segment with its trapezoid weights.

    ``params`` is the boundary parameter of each node (``x`` or ``y`` on the
    rectangle, ``theta`` on the annulus); ``weights`` are arc-length weights.
    """

    id: int
    nodes: np.ndarray
    params: np.ndarray
    weights: np.ndarray
    length: float
    periodic: bool

    def __len__(self):
        return len(self.nodes)


@dataclass(frozen=True, eq=False)
class Grid:
    domain: Domain
    n1: int
    n2: int
    xi: np.ndarray
    eta: np.ndarray
    x: np.ndarray
    y: np.ndarray
    segments: Dict[int, Segment]
    owner: np.ndarray = field(repr=False)

    @property
    def h1(self) -> float:
        return float(self.xi[1] - self.xi[0])

    @property
    def h2(self) -> float:
        return float(self.eta[1] - self.eta[0])

    @property
    def periodic(self) -> bool:
        return isinstance(self.domain, Annulus)

    @property
    def n_nodes(self) -> int:
        return self.n1 * self.n2

    def segment(self, seg: int) -> Segment:
        try:
            return self.segments[seg]
        except KeyError:
            raise UnknownSegment(f"segment {seg!r} not on this grid") from None

    def boundary_mask(self) -> np.ndarray:
        return self.owner > 0

    def node_index(self, i, j):
        return np.asarray(i) * self.n2 + np.asarray(j)


def _trapezoid_weights(n: int, h: float) -> np.ndarray:
    w = np.full(n, h)
    w[0] = w[-1] = 0.5 * h
    return w


def build_grid(domain: Domain, n1: int, n2: int) -> Grid:
    """Uniform tensor grid with ``n1 x n2`` nodes.

    On the rectangle ``n1`` counts nodes along ``x`` and ``n2`` along ``y``;
    on the annulus ``n1`` is radial and ``n2`` angular. Corner nodes of the
    rectangle appear in the node lists of both adjacent segments but are
    *owned* by the vertical segments 3 and 4.
    """
    if not isinstance(domain, (Rectangle, Annulus)):
        raise InvalidDomain(f"unsupported domain {domain!r}")
    if n1 < 3 or n2 < 3:
        raise TooCoarse(f"need at least 3 nodes per direction, got {n1}x{n2}")

    idx = np.arange(n1 * n2).reshape(n1, n2)
    owner = np.zeros(n1 * n2, dtype=int)

    if isinstance(domain, Rectangle):
        xi = np.linspace(0.0, domain.width, n1)
        eta = np.linspace(0.0, domain.height, n2)
        x, y = np.meshgrid(xi, eta, indexing="ij")
        hx, hy = xi[1] - xi[0], eta[1] - eta[0]
        segments = {
            1: Segment(1, idx[:, 0], xi.copy(), _trapezoid_weights(n1, hx), domain.width, False),
            2: Segment(2, idx[:, -1], xi.copy(), _trapezoid_weights(n1, hx), domain.width, False),
            3: Segment(3, idx[0, :], eta.copy(), _trapezoid_weights(n2, hy), domain.height, False),
            4: Segment(4, idx[-1, :], eta.copy(), _trapezoid_weights(n2, hy), domain.height, False),
        }
        for seg in (1, 2, 3, 4):  # later segments overwrite: corners go to 3/4
            owner[segments[seg].nodes] = seg
    else:
        xi = np.linspace(domain.inner_radius, domain.outer_radius, n1)
        eta = 2.0 * np.pi * np.arange(n2) / n2
        r, th = np.meshgrid(xi, eta, indexing="ij")
        x, y = r * np.cos(th), r * np.sin(th)
        dth = 2.0 * np.pi / n2
        segments = {}
        for seg, i, radius in ((1, 0, domain.inner_radius), (2, -1, domain.outer_radius)):
            segments[seg] = Segment(
                seg, idx[i, :], eta.copy(), np.full(n2, radius * dth), 2.0 * np.pi * radius, True
            )
            owner[segments[seg].nodes] = seg

    return Grid(domain, n1, n2, xi, eta, x, y, segments, owner)


class BoundaryFunction:
    """Real samples on the nodes of one boundary segment.

    Supports ``+``, ``-``, negation and scalar multiplication with another
    function on the same segment (weights are taken from the left operand).
    """

    __slots__ = ("segment", "values", "weights", "params")

    def __init__(self, segment: int, values, weights, params=None):
        values = np.asarray(values, dtype=float)
        weights = np.asarray(weights, dtype=float)
        if values.shape != weights.shape:
            raise ValueError(f"{values.shape[0]} values for {weights.shape[0]} nodes")
        if np.any(weights <= 0):
            raise ValueError("quadrature weights must be strictly positive")
        self.segment = segment
        self.values = values
        self.weights = weights
        self.params = None if params is None else np.asarray(params, dtype=float)

    @classmethod
    def on(cls, grid: Grid, seg: int, values) -> "BoundaryFunction":
        s = grid.segment(seg)
        values = np.broadcast_to(np.asarray(values, dtype=float), s.weights.shape).copy()
        return cls(seg, values, s.weights, s.params)

    def with_values(self, values) -> "BoundaryFunction":
        return BoundaryFunction(self.segment, values, self.weights, self.params)

    def __len__(self):
        return len(self.values)

    def _check(self, other):
        if isinstance(other, BoundaryFunction):
            if other.segment != self.segment or len(other) != len(self):
                raise ValueError("boundary functions live on different segments")
            return other.values
        return other

    def __add__(self, other):
        return self.with_values(self.values + self._check(other))

    __radd__ = __add__

    def __sub__(self, other):
        return self.with_values(self.values - self._check(other))

    def __rsub__(self, other):
        return self.with_values(self._check(other) - self.values)

    def __mul__(self, c):
        return self.with_values(self.values * c)

    __rmul__ = __mul__

    def __truediv__(self, c):
        return self.with_values(self.values / c)

    def __neg__(self):
        return self.with_values(-self.values)

    def __repr__(self):
        return f"BoundaryFunction(segment={self.segment}, n={len(self)})"


def sample_boundary(grid: Grid, seg: int, func: Callable) -> BoundaryFunction:
    """Evaluate ``func`` at the boundary parameter of every node of ``seg``."""
    s = grid.segment(seg)
    values = np.broadcast_to(np.asarray(func(s.params), dtype=float), s.params.shape)
    return BoundaryFunction(seg, values.copy(), s.weights, s.params)


def boundary_l2_norm(u: BoundaryFunction) -> float:
    return float(np.sqrt(np.sum(u.weights * u.values**2)))


# -- spectral representation of boundary functions ---------------------------


def _is_periodic(u: BoundaryFunction) -> bool:
    # periodic segments carry uniform weights, open ones have half weights at the ends
    return bool(np.allclose(u.weights, u.weights[0], rtol=1e-12, atol=0.0))


def boundary_modes(u: BoundaryFunction):
    """Fourier coefficients of ``u`` and their frequencies.

    Open segments use the sine basis ``sin(m pi s / L)``, ``m = 1..n-2``, on
    the interior nodes (endpoint samples are ignored). Closed segments use the
    real Fourier basis; the result is ``(coeffs, freq)`` where ``coeffs`` is
    complex from :func:`scipy.fft.rfft` normalised so that
    ``u(theta) = Re sum_m c_m exp(i m theta)`` with the usual doubling.
    """
    v = u.values
    if _is_periodic(u):
        n = len(v)
        c = scipy.fft.rfft(v) / n
        return c, np.arange(len(c))
    inner = v[1:-1]
    c = scipy.fft.dst(inner, type=1) / (len(inner) + 1)
    return c, np.arange(1, len(inner) + 1)


def from_boundary_modes(template: BoundaryFunction, coeffs) -> BoundaryFunction:
    """Inverse of :func:`boundary_modes` onto the nodes of ``template``."""
    n = len(template)
    if _is_periodic(template):
        return template.with_values(scipy.fft.irfft(np.asarray(coeffs) * n, n=n))
    values = np.zeros(n)
    values[1:-1] = scipy.fft.dst(np.asarray(coeffs, dtype=float), type=1) / 2.0
    return template.with_values(values)


def boundary_sobolev_norm(u: BoundaryFunction, s: float) -> float:
    """Discrete ``H^s`` norm from the mode coefficients.

    The frequency of sine mode ``m`` on a segment of length ``L`` is
    ``m pi / L``; on a circle it is the angular frequency ``m``. The ``s = 0``
    case agrees with :func:`boundary_l2_norm` for band-limited functions.
    """
    c, m = boundary_modes(u)
    length = float(np.sum(u.weights))
    if _is_periodic(u):
        mult = np.where(m == 0, 1.0, 2.0)
        if len(u) % 2 == 0:
            mult[-1] = 1.0
        return float(np.sqrt(length * np.sum(mult * (1.0 + m**2) ** s * np.abs(c) ** 2)))
    omega = m * np.pi / length
    return float(np.sqrt(0.5 * length * np.sum((1.0 + omega**2) ** s * c**2)))
