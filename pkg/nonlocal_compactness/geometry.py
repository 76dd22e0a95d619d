"""
Domains, cones and quadrature grids.

Three bounded domain shapes are supported:
- box: axis-aligned box [lo, hi]
- ball: Euclidean ball B(center, radius)
- graph_patch: the normalized Lipschitz-graph model near a boundary point,

      {(x', x_d): |x'_i| < 4 r0, zeta(x') < x_d < 4 r0}

  with zeta(0) = 0 and Lipschitz constant at most 1/2, so that the
  vertical cone Sigma = {|x'| <= x_d} (axis e_d, aperture pi/4) fits
  above every boundary point.

Cones are spherical caps {s in S^{d-1}: angle(s, axis) <= aperture} or the
full sphere. Grids are Cartesian cell-centred lattices over the domain's
bounding box, with cell volumes clipped to the domain.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Union

import numpy as np
from scipy.integrate import trapezoid
from scipy.interpolate import RegularGridInterpolator
from scipy.special import gamma

from .errors import CapabilityError, DomainError

logger = logging.getLogger(__name__)

SUPPORTED_SHAPES = ("box", "ball", "graph_patch")
SUPPORTED_DIMENSIONS = (1, 2, 3)

# Normalization of the graph model: Lipschitz constant and cone aperture
GRAPH_LIPSCHITZ_MAX = 0.5
GRAPH_APERTURE = math.pi / 4

# Subsamples per axis used to clip cell volumes to the domain
CLIP_SUBSAMPLES = 4

_GOLDEN_ANGLE = math.pi * (3.0 - math.sqrt(5.0))
_CHUNK = 512


def _check_dimension(d: int) -> None:
    if d not in SUPPORTED_DIMENSIONS:
        raise CapabilityError(
            f"Dimension {d} is not supported. "
            f"Must be one of: {list(SUPPORTED_DIMENSIONS)}"
        )


def sphere_area(d: int) -> float:
    """Surface measure of the unit sphere S^{d-1} (counting measure if d=1)."""
    return 2 * math.pi ** (d / 2) / gamma(d / 2)


def ball_volume(d: int, radius: float = 1.0) -> float:
    """Lebesgue measure of the ball of the given radius in R^d."""
    return sphere_area(d) / d * radius**d


# ---------------------------------------------------------------------------
# Cones
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Cone:
    """
    Spherical-cap direction set with axis v0 and half-angle aperture.

    Attributes:
        axis: Unit axis vector v0 (normalized on construction)
        aperture: Half-angle in (0, pi/2], or pi for the full sphere
        full_sphere: Whether the cone is all of S^{d-1}
    """

    axis: tuple
    aperture: float
    full_sphere: bool = False

    def __post_init__(self):
        axis = np.atleast_1d(np.asarray(self.axis, dtype=float))
        norm = np.linalg.norm(axis)
        if axis.ndim != 1 or norm == 0:
            raise ValueError("Cone axis must be a nonzero vector")
        _check_dimension(axis.size)
        if self.full_sphere:
            object.__setattr__(self, "aperture", math.pi)
        elif not 0 < self.aperture <= math.pi / 2:
            raise ValueError(
                f"Cone aperture {self.aperture} must lie in (0, pi/2]"
            )
        object.__setattr__(self, "axis", tuple(float(a) for a in axis / norm))

    @classmethod
    def full(cls, d: int) -> "Cone":
        """Full-sphere cone in R^d."""
        axis = np.zeros(d)
        axis[-1] = 1.0
        return cls(axis=tuple(axis), aperture=math.pi, full_sphere=True)

    @classmethod
    def sigma(cls, d: int) -> "Cone":
        """The vertical cone {|x'| <= x_d} of the graph model."""
        axis = np.zeros(d)
        axis[-1] = 1.0
        return cls(axis=tuple(axis), aperture=GRAPH_APERTURE)

    @property
    def d(self) -> int:
        return len(self.axis)

    @property
    def area(self) -> float:
        """H^{d-1} measure of the cap."""
        return cap_area(self)

    def to_dict(self) -> dict:
        return {
            "axis": list(self.axis),
            "aperture": self.aperture,
            "full_sphere": self.full_sphere,
        }


def cap_area(cone: Cone) -> float:
    """
    H^{d-1} measure of a cone's direction set.

    Args:
        cone: Cone

    Returns:
        2*aperture in d=2, 2*pi*(1 - cos(aperture)) in d=3, number of
        directions in d=1.
    """
    d = cone.d
    if cone.full_sphere:
        return sphere_area(d)
    if d == 1:
        return 1.0
    if d == 2:
        return 2 * cone.aperture
    return 2 * math.pi * (1 - math.cos(cone.aperture))


def cone_membership(
    cone: Cone, z: Union[Sequence[float], np.ndarray]
) -> Union[bool, np.ndarray]:
    """
    Test whether offsets point into the cone.

    Args:
        cone: Cone
        z: Offset of shape (d,) or offsets of shape (m, d), all nonzero

    Returns:
        Boolean (or boolean array) angle(z, axis) <= aperture

    Raises:
        DomainError: If any offset is zero

    Examples:
        >>> cone_membership(Cone((0, 1), math.pi / 4), (0.5, 0.6))
        True
    """
    z = np.asarray(z, dtype=float)
    single = z.ndim == 1
    z = np.atleast_2d(z)
    norms = np.linalg.norm(z, axis=1)
    if np.any(norms == 0):
        raise DomainError("Cone membership is undefined at z = 0")
    if cone.full_sphere:
        result = np.ones(len(z), dtype=bool)
    else:
        cosines = np.clip(z @ np.asarray(cone.axis) / norms, -1.0, 1.0)
        result = np.arccos(cosines) <= cone.aperture + 1e-12
    return bool(result[0]) if single else result


def ball_sector(
    cone: Cone, delta: float, h: Union[float, Sequence[float]]
) -> np.ndarray:
    """
    Enumerate lattice offsets of the ball sector B^Lambda_delta.

    Args:
        cone: Direction set Lambda
        delta: Sector radius
        h: Lattice spacing (scalar or per axis)

    Returns:
        Array of shape (m, d) of offsets k*h with 0 < |k*h| <= delta and
        direction in the cone
    """
    d = cone.d
    h = np.broadcast_to(np.asarray(h, dtype=float), (d,))
    reach = np.ceil(delta / h).astype(int)
    ranges = [np.arange(-k, k + 1) for k in reach]
    ks = np.stack(np.meshgrid(*ranges, indexing="ij"), axis=-1).reshape(
        -1, d
    )
    offsets = ks * h
    norms = np.linalg.norm(offsets, axis=1)
    offsets = offsets[(norms > 0) & (norms <= delta * (1 + 1e-12))]
    if len(offsets) == 0:
        return offsets
    return offsets[cone_membership(cone, offsets)]


def _householder_to(axis: np.ndarray) -> np.ndarray:
    """Orthogonal matrix sending e_d to ``axis``."""
    d = axis.size
    e = np.zeros(d)
    e[-1] = 1.0
    w = e - axis
    if np.linalg.norm(w) < 1e-14:
        return np.eye(d)
    return np.eye(d) - 2 * np.outer(w, w) / (w @ w)


def sphere_quadrature(
    cone: Cone, n_points: int
) -> tuple[np.ndarray, np.ndarray]:
    """
    Quadrature rule for H^{d-1} restricted to a cone's directions.

    In d=2 the rule uses uniformly spaced angles (midpoints) across the cap;
    in d=3 equal-weight Fibonacci points with z uniform in
    [cos(aperture), 1], rotated onto the axis. In d=1 the sphere is {-1, 1}.

    Args:
        cone: Direction set
        n_points: Number of quadrature directions (>= 8)

    Returns:
        Tuple (directions of shape (n, d), weights of shape (n,)); the
        weights sum to the cap area

    Raises:
        ValueError: If n_points < 8
        CapabilityError: If d > 3
    """
    if n_points < 8:
        raise ValueError(f"n_points must be at least 8, got {n_points}")
    d = cone.d
    axis = np.asarray(cone.axis)

    if d == 1:
        if cone.full_sphere:
            return np.array([[1.0], [-1.0]]), np.ones(2)
        return axis.reshape(1, 1).copy(), np.ones(1)

    if d == 2:
        half = cone.aperture
        phi = -half + 2 * half * (np.arange(n_points) + 0.5) / n_points
        base = math.atan2(axis[1], axis[0])
        directions = np.stack(
            [np.cos(base + phi), np.sin(base + phi)], axis=1
        )
        weights = np.full(n_points, 2 * half / n_points)
        return directions, weights

    if d == 3:
        lowest = math.cos(cone.aperture)
        k = np.arange(n_points)
        z = 1 - (1 - lowest) * (k + 0.5) / n_points
        radius = np.sqrt(np.clip(1 - z**2, 0.0, None))
        azimuth = k * _GOLDEN_ANGLE
        points = np.stack(
            [radius * np.cos(azimuth), radius * np.sin(azimuth), z], axis=1
        )
        directions = points @ _householder_to(axis).T
        weights = np.full(n_points, cap_area(cone) / n_points)
        return directions, weights

    raise CapabilityError(
        f"Sphere quadrature is not available in dimension {d}"
    )


def default_quadrature_size(d: int) -> int:
    """Direction count used for cone integrals in dimension d."""
    return {1: 8, 2: 4096, 3: 20000}[d]


def sector_min_constant(cone: Cone, p: float, n_probe: int = 256) -> float:
    """
    Lower bound c0 of inf_w integral_Lambda |w.s|^p dH^{d-1}(s).

    The infimum over unit w is taken over ``n_probe`` probe directions
    covering the whole sphere.

    Args:
        cone: Direction set Lambda
        p: Exponent (>= 1)
        n_probe: Number of probe directions w

    Returns:
        c0 > 0

    Examples:
        >>> sector_min_constant(Cone.full(2), 2.0)  # pi
        3.14159...
    """
    d = cone.d
    directions, weights = sphere_quadrature(cone, default_quadrature_size(d))
    probes, _ = sphere_quadrature(Cone.full(d), max(n_probe, 8))
    values = np.abs(probes @ directions.T) ** p @ weights
    return float(values.min())


# ---------------------------------------------------------------------------
# Domains
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Domain:
    """
    Bounded domain Omega.

    Use :func:`box_domain`, :func:`ball_domain`, :func:`graph_patch_domain`
    or :func:`graph_patch_from_table` to construct one.
    """

    shape: str
    d: int
    lo: Optional[np.ndarray] = None
    hi: Optional[np.ndarray] = None
    center: Optional[np.ndarray] = None
    radius: Optional[float] = None
    r0: Optional[float] = None
    zeta_axes: tuple = ()
    zeta_values: Optional[np.ndarray] = None
    lipschitz: Optional[float] = None
    _zeta_interp: Optional[Callable] = field(default=None, repr=False)

    def zeta(self, xp: np.ndarray) -> np.ndarray:
        """Evaluate the boundary graph at points x' of shape (m, d-1)."""
        if self.shape != "graph_patch":
            raise CapabilityError("Only graph patches carry a graph zeta")
        xp = np.atleast_2d(np.asarray(xp, dtype=float))
        if self.d == 2:
            return np.interp(xp[:, 0], self.zeta_axes[0], self.zeta_values)
        return self._zeta_interp(xp)

    def bounding_box(self) -> tuple[np.ndarray, np.ndarray]:
        """Axis-aligned bounding box (lo, hi) of the closure of Omega."""
        if self.shape == "box":
            return self.lo.copy(), self.hi.copy()
        if self.shape == "ball":
            return self.center - self.radius, self.center + self.radius
        half = 4 * self.r0
        lo = np.full(self.d, -half)
        hi = np.full(self.d, half)
        lo[-1] = min(float(np.min(self.zeta_values)), 0.0)
        return lo, hi

    def contains(self, points: np.ndarray) -> np.ndarray:
        """Strict membership x in Omega for points of shape (m, d)."""
        x = np.atleast_2d(np.asarray(points, dtype=float))
        if self.shape == "box":
            return np.all((x > self.lo) & (x < self.hi), axis=1)
        if self.shape == "ball":
            return np.linalg.norm(x - self.center, axis=1) < self.radius
        half = 4 * self.r0
        inside = np.all(np.abs(x[:, :-1]) < half, axis=1) & (x[:, -1] < half)
        out = np.zeros(len(x), dtype=bool)
        if inside.any():
            out[inside] = x[inside, -1] > self.zeta(x[inside, :-1])
        return out

    @property
    def volume(self) -> float:
        """Lebesgue measure |Omega|."""
        if self.shape == "box":
            return float(np.prod(self.hi - self.lo))
        if self.shape == "ball":
            return ball_volume(self.d, self.radius)
        height = 4 * self.r0 - self.zeta_values
        if self.d == 2:
            return float(trapezoid(height, self.zeta_axes[0]))
        inner = trapezoid(height, self.zeta_axes[1], axis=1)
        return float(trapezoid(inner, self.zeta_axes[0]))

    @property
    def inradius(self) -> float:
        """Largest distance from a point of Omega to the boundary."""
        if self.shape == "box":
            return float(np.min(self.hi - self.lo) / 2)
        if self.shape == "ball":
            return float(self.radius)
        lo, hi = self.bounding_box()
        axes = [np.linspace(lo[i], hi[i], 33)[1:-1] for i in range(self.d)]
        mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
        sample = mesh.reshape(-1, self.d)
        sample = sample[self.contains(sample)]
        return float(np.max(distance_to_boundary(self, sample)))

    def to_dict(self) -> dict:
        if self.shape == "box":
            return {
                "shape": "box",
                "bounds": [self.lo.tolist(), self.hi.tolist()],
            }
        if self.shape == "ball":
            return {
                "shape": "ball",
                "center": self.center.tolist(),
                "radius": self.radius,
            }
        return {
            "shape": "graph_patch",
            "d": self.d,
            "r0": self.r0,
            "lipschitz": self.lipschitz,
        }


def _frozen(array: np.ndarray) -> np.ndarray:
    array = np.array(array, dtype=float)
    array.setflags(write=False)
    return array


def box_domain(
    lo: Union[float, Sequence[float]], hi: Union[float, Sequence[float]]
) -> Domain:
    """
    Axis-aligned box [lo, hi].

    Args:
        lo: Lower corner
        hi: Upper corner

    Returns:
        Domain of shape "box"
    """
    lo = np.atleast_1d(np.asarray(lo, dtype=float))
    hi = np.atleast_1d(np.asarray(hi, dtype=float))
    if lo.shape != hi.shape or lo.ndim != 1:
        raise ValueError("Box corners must be vectors of equal length")
    _check_dimension(lo.size)
    if np.any(hi <= lo):
        raise ValueError("Box bounds must satisfy lo < hi on every axis")
    return Domain(shape="box", d=lo.size, lo=_frozen(lo), hi=_frozen(hi))


def ball_domain(center: Sequence[float], radius: float) -> Domain:
    """Ball B(center, radius)."""
    center = np.atleast_1d(np.asarray(center, dtype=float))
    _check_dimension(center.size)
    if radius <= 0:
        raise ValueError(f"Ball radius must be positive, got {radius}")
    return Domain(
        shape="ball",
        d=center.size,
        center=_frozen(center),
        radius=float(radius),
    )


def _table_lipschitz(axes: tuple, values: np.ndarray) -> float:
    """Largest difference quotient between tabulated graph points."""
    if len(axes) == 1:
        return float(np.max(np.abs(np.diff(values) / np.diff(axes[0]))))
    mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
    points = mesh.reshape(-1, len(axes))
    flat = values.ravel()
    best = 0.0
    for start in range(0, len(points), 256):
        stop = start + 256
        dist = np.linalg.norm(
            points[start:stop, None, :] - points[None, :, :], axis=2
        )
        jump = np.abs(flat[start:stop, None] - flat[None, :])
        mask = dist > 0
        best = max(best, float(np.max(jump[mask] / dist[mask])))
    return best


def graph_patch_from_table(
    axes: Sequence[np.ndarray], values: np.ndarray, r0: float
) -> Domain:
    """
    Graph patch with zeta tabulated on a tensor grid.

    Args:
        axes: d-1 increasing coordinate arrays covering [-4 r0, 4 r0]
        values: zeta at the tabulated points, shape (len(a) for a in axes)
        r0: Patch scale

    Returns:
        Domain of shape "graph_patch" with d = len(axes) + 1

    Raises:
        ValueError: If zeta(0) != 0, the Lipschitz estimate exceeds 1/2 or
            the table does not cover the window
    """
    axes = tuple(np.asarray(a, dtype=float) for a in axes)
    values = np.asarray(values, dtype=float)
    d = len(axes) + 1
    if d not in (2, 3):
        raise CapabilityError(
            f"Graph patches need d in [2, 3], got {d}"
        )
    if r0 <= 0:
        raise ValueError(f"r0 must be positive, got {r0}")
    if values.shape != tuple(a.size for a in axes):
        raise ValueError(
            f"zeta table shape {values.shape} does not match its axes"
        )
    half = 4 * r0
    for a in axes:
        if np.any(np.diff(a) <= 0):
            raise ValueError("zeta table axes must be strictly increasing")
        if a[0] > -half + 1e-12 * half or a[-1] < half - 1e-12 * half:
            raise ValueError(
                f"zeta table must cover the window [-{half}, {half}]"
            )

    lipschitz = _table_lipschitz(axes, values)
    if lipschitz > GRAPH_LIPSCHITZ_MAX + 1e-12:
        raise ValueError(
            f"Graph Lipschitz constant {lipschitz:.4g} exceeds "
            f"{GRAPH_LIPSCHITZ_MAX}"
        )

    interp = None
    if d == 3:
        interp = RegularGridInterpolator(
            axes, values, method="linear", bounds_error=False, fill_value=None
        )
    values = _frozen(values)
    domain = Domain(
        shape="graph_patch",
        d=d,
        r0=float(r0),
        zeta_axes=tuple(_frozen(a) for a in axes),
        zeta_values=values,
        lipschitz=lipschitz,
        _zeta_interp=interp,
    )
    at_origin = float(domain.zeta(np.zeros((1, d - 1)))[0])
    if abs(at_origin) > 1e-12:
        raise ValueError(
            f"Graph must pass through the origin, got zeta(0) = {at_origin}"
        )
    return domain


def graph_patch_domain(
    zeta: Callable[[np.ndarray], np.ndarray],
    r0: float,
    d: int = 2,
    n_table: Optional[int] = None,
) -> Domain:
    """
    Graph patch from an analytic profile, tabulated on the window.

    Args:
        zeta: Vectorized profile mapping x' of shape (m, d-1) to (m,)
        r0: Patch scale
        d: Dimension (2 or 3)
        n_table: Table nodes per axis (default 257 in d=2, 65 in d=3)

    Returns:
        Domain of shape "graph_patch"

    Examples:
        >>> dom = graph_patch_domain(
        ...     lambda xp: np.linalg.norm(xp, axis=1) / 2, r0=0.5
        ... )
    """
    if n_table is None:
        n_table = 257 if d == 2 else 65
    half = 4 * r0
    axes = [np.linspace(-half, half, n_table) for _ in range(d - 1)]
    mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
    values = np.asarray(zeta(mesh.reshape(-1, d - 1)), dtype=float)
    return graph_patch_from_table(axes, values.reshape(mesh.shape[:-1]), r0)


def _graph_distance(domain: Domain, x: np.ndarray) -> np.ndarray:
    """Distance from points to the tabulated graph (x', zeta(x'))."""
    if domain.d == 2:
        nodes = np.stack([domain.zeta_axes[0], domain.zeta_values], axis=1)
        a, b = nodes[:-1], nodes[1:]
        ab = b - a
        ab2 = np.sum(ab**2, axis=1)
        out = np.empty(len(x))
        for start in range(0, len(x), _CHUNK):
            chunk = x[start:start + _CHUNK]
            ap = chunk[:, None, :] - a[None, :, :]
            t = np.clip(np.sum(ap * ab, axis=2) / ab2, 0.0, 1.0)
            closest = a[None, :, :] + t[..., None] * ab[None, :, :]
            dist = np.linalg.norm(chunk[:, None, :] - closest, axis=2)
            out[start:start + _CHUNK] = dist.min(axis=1)
        return out

    # d = 3: nearest tabulated node, then a local sampled refinement
    axes = domain.zeta_axes
    mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
    base = mesh.reshape(-1, 2)
    nodes = np.column_stack([base, domain.zeta_values.ravel()])
    step = max(float(np.max(np.diff(axis))) for axis in axes)
    ticks = np.linspace(-step, step, 11)
    local = np.stack(np.meshgrid(ticks, ticks, indexing="ij"), -1).reshape(
        -1, 2
    )
    out = np.empty(len(x))
    for start in range(0, len(x), 256):
        chunk = x[start:start + 256]
        dist = np.linalg.norm(chunk[:, None, :] - nodes[None, :, :], axis=2)
        nearest = base[np.argmin(dist, axis=1)]
        candidates = (nearest[:, None, :] + local[None, :, :]).reshape(-1, 2)
        surface = np.column_stack([candidates, domain.zeta(candidates)])
        surface = surface.reshape(len(chunk), len(local), 3)
        refined = np.linalg.norm(chunk[:, None, :] - surface, axis=2)
        out[start:start + 256] = np.minimum(
            dist.min(axis=1), refined.min(axis=1)
        )
    return out


def distance_to_boundary(
    domain: Domain, x: Union[Sequence[float], np.ndarray]
) -> Union[float, np.ndarray]:
    """
    Euclidean distance from points of Omega to the boundary.

    Exact for boxes and balls. For graph patches the distance to the graph
    is exact on the piecewise-linear table in d=2 and a sampled minimum in
    d=3; window sides and top are planes.

    Args:
        domain: Domain
        x: Point of shape (d,) or points of shape (m, d)

    Returns:
        Distance (float for a single point, array otherwise)

    Raises:
        DomainError: If a point lies outside Omega

    Examples:
        >>> distance_to_boundary(box_domain([0, 0], [1, 1]), [0.5, 0.5])
        0.5
    """
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    x = np.atleast_2d(x)
    if x.shape[1] != domain.d:
        raise ValueError(
            f"Points have dimension {x.shape[1]}, domain has {domain.d}"
        )
    inside = domain.contains(x)
    if domain.shape == "box":
        dist = np.minimum(x - domain.lo, domain.hi - x).min(axis=1)
        outside = dist < 0
    elif domain.shape == "ball":
        dist = domain.radius - np.linalg.norm(x - domain.center, axis=1)
        outside = dist < 0
    else:
        outside = ~inside
        dist = np.zeros(len(x))
        if inside.any():
            xi = x[inside]
            half = 4 * domain.r0
            sides = (half - np.abs(xi[:, :-1])).min(axis=1)
            top = half - xi[:, -1]
            graph = _graph_distance(domain, xi)
            dist[inside] = np.minimum(np.minimum(sides, top), graph)
    if np.any(outside):
        bad = x[np.argmax(outside)]
        raise DomainError(f"Point {bad.tolist()} lies outside the domain")
    dist = np.maximum(dist, 0.0)
    return float(dist[0]) if single else dist


# ---------------------------------------------------------------------------
# Grids
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Grid:
    """
    Cell-centred quadrature grid over a domain.

    Attributes:
        domain: The domain Omega
        h: Cell width per axis
        shape: Number of cells per axis of the bounding-box lattice
        lo: Lower corner of the bounding box
        nodes: Cell centres inside Omega, shape (N, d), lexicographic order
        weights: Cell volumes clipped to Omega, shape (N,)
        index: Lattice multi-index of each node, shape (N, d)
        boundary_distance: dist(node, boundary) for each node
    """

    domain: Domain
    h: np.ndarray
    shape: tuple
    lo: np.ndarray
    nodes: np.ndarray
    weights: np.ndarray
    index: np.ndarray
    boundary_distance: np.ndarray

    @property
    def d(self) -> int:
        return self.domain.d

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def volume(self) -> float:
        return float(self.weights.sum())

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.h))

    def lattice_axes(self, pad: int = 0) -> list:
        """Cell-centre coordinates per axis, extended by ``pad`` cells."""
        return [
            self.lo[i] + (np.arange(-pad, self.shape[i] + pad) + 0.5)
            * self.h[i]
            for i in range(self.d)
        ]

    def to_lattice(self, values: np.ndarray, pad: int = 0) -> np.ndarray:
        """
        Scatter node values onto the bounding-box lattice, zero elsewhere.

        Args:
            values: Array of shape (N,) or (N, k)
            pad: Extra zero cells on every side

        Returns:
            Array of shape (*(shape + 2 pad)) or (*(shape + 2 pad), k)
        """
        values = np.asarray(values)
        lattice_shape = tuple(s + 2 * pad for s in self.shape)
        out = np.zeros(lattice_shape + values.shape[1:], dtype=values.dtype)
        out[tuple((self.index + pad).T)] = values
        return out

    def lattice_weights(self, pad: int = 0) -> np.ndarray:
        """Clipped cell volumes on the lattice (zero outside Omega)."""
        return self.to_lattice(self.weights, pad=pad)

    def coarsen(self) -> "Grid":
        """Grid over the same domain with half as many cells per axis."""
        return build_grid(
            self.domain,
            n_per_axis=[max(1, s // 2) for s in self.shape],
        )


def _inside_fraction(
    domain: Domain, centers: np.ndarray, cell: np.ndarray
) -> np.ndarray:
    if domain.shape == "box":
        return np.ones(len(centers))
    d = domain.d
    ticks = (np.arange(CLIP_SUBSAMPLES) + 0.5) / CLIP_SUBSAMPLES - 0.5
    offsets = np.stack(
        np.meshgrid(*([ticks] * d), indexing="ij"), axis=-1
    ).reshape(-1, d) * cell
    fractions = np.empty(len(centers))
    for start in range(0, len(centers), _CHUNK):
        chunk = centers[start:start + _CHUNK]
        samples = (chunk[:, None, :] + offsets[None, :, :]).reshape(-1, d)
        hits = domain.contains(samples).reshape(len(chunk), len(offsets))
        fractions[start:start + _CHUNK] = hits.mean(axis=1)
    return fractions


def build_grid(
    domain: Domain,
    h: Optional[Union[float, Sequence[float]]] = None,
    n_per_axis: Optional[Union[int, Sequence[int]]] = None,
) -> Grid:
    """
    Build a cell-centred grid over a domain.

    Cells of the bounding-box lattice whose centre lies in Omega become
    nodes; their weights are cell volumes times the fraction of
    ``CLIP_SUBSAMPLES**d`` subsamples inside Omega.

    Args:
        domain: Domain
        h: Target cell width (rounded so cells tile the bounding box)
        n_per_axis: Number of cells per axis (alternative to h)

    Returns:
        Grid

    Raises:
        ValueError: Unless exactly one of h and n_per_axis is given
    """
    if (h is None) == (n_per_axis is None):
        raise ValueError("Specify exactly one of h or n_per_axis")
    d = domain.d
    lo, hi = domain.bounding_box()
    extent = hi - lo
    if n_per_axis is not None:
        counts = np.broadcast_to(np.asarray(n_per_axis, dtype=int), (d,))
    else:
        target = np.broadcast_to(np.asarray(h, dtype=float), (d,))
        if np.any(target <= 0):
            raise ValueError(f"h must be positive, got {h}")
        counts = np.ceil(extent / target - 1e-9).astype(int)
    counts = np.array(counts)
    if np.any(counts < 1):
        raise ValueError(f"n_per_axis must be positive, got {n_per_axis}")
    cell = extent / counts

    index = np.stack(
        np.meshgrid(*[np.arange(c) for c in counts], indexing="ij"), axis=-1
    ).reshape(-1, d)
    centers = lo + (index + 0.5) * cell
    inside = domain.contains(centers)
    centers = centers[inside]
    index = index[inside]
    weights = np.prod(cell) * _inside_fraction(domain, centers, cell)
    if len(centers) == 0:
        raise ValueError("Grid has no nodes inside the domain")
    boundary = distance_to_boundary(domain, centers)

    logger.debug(
        "Built %s grid with %d nodes (h=%s)",
        domain.shape,
        len(centers),
        cell.tolist(),
    )
    index.setflags(write=False)
    return Grid(
        domain=domain,
        h=_frozen(cell),
        shape=tuple(int(c) for c in counts),
        lo=_frozen(lo),
        nodes=_frozen(centers),
        weights=_frozen(weights),
        index=index,
        boundary_distance=_frozen(boundary),
    )


def interior_subset(grid: Grid, tau: float) -> np.ndarray:
    """
    Node mask of Omega_tau = {x in Omega: dist(x, boundary) > tau}.

    Args:
        grid: Grid
        tau: Collar width (>= 0); tau = 0 selects every node

    Returns:
        Boolean mask of shape (N,)
    """
    if tau < 0:
        raise ValueError(f"tau must be nonnegative, got {tau}")
    if tau == 0:
        return np.ones(grid.n_nodes, dtype=bool)
    return grid.boundary_distance > tau


# ---------------------------------------------------------------------------
# Graph-model checks
# ---------------------------------------------------------------------------


@dataclass
class InclusionReport:
    """Outcome of a sampled set-inclusion check."""

    r: float
    n_samples: int
    first_holds: bool
    second_holds: bool
    first_counterexamples: list
    second_counterexamples: list

    @property
    def holds(self) -> bool:
        return self.first_holds and self.second_holds

    def to_dict(self) -> dict:
        return {
            "r": self.r,
            "n_samples": self.n_samples,
            "first_holds": self.first_holds,
            "second_holds": self.second_holds,
            "first_counterexamples": self.first_counterexamples,
            "second_counterexamples": self.second_counterexamples,
        }


def _sample_ball(
    rng: np.random.Generator, d: int, radius: float, n: int
) -> np.ndarray:
    points = []
    count = 0
    while count < n:
        batch = rng.uniform(-radius, radius, size=(2 * n, d))
        batch = batch[np.linalg.norm(batch, axis=1) < radius]
        points.append(batch)
        count += len(batch)
    return np.concatenate(points)[:n]


def _in_sigma(z: np.ndarray) -> np.ndarray:
    return np.linalg.norm(z[:, :-1], axis=1) <= z[:, -1] + 1e-12


def _check_graph_patch(domain: Domain, r: float) -> None:
    if domain.shape != "graph_patch":
        raise CapabilityError("Inclusion checks need a graph_patch domain")
    if not 0 < r <= domain.r0:
        raise ValueError(f"r must lie in (0, r0={domain.r0}], got {r}")


def verify_graph_inclusion(
    domain: Domain,
    r: float,
    n_samples: int = 10_000,
    seed: int = 0,
    max_counterexamples: int = 10,
) -> InclusionReport:
    """
    Check Omega ∩ B_{r/2} ⊂ Gamma_r + (Sigma ∩ B_r) ⊂ Omega ∩ B_{3r}.

    Gamma_r is the graph over |x'| < r. The first inclusion is checked with
    the vertical witness x' (falling back to a search over graph points);
    the second by sampling graph points and cone offsets.

    Args:
        domain: graph_patch domain
        r: Scale in (0, r0]
        n_samples: Samples per inclusion (at least 10^4 recommended)
        seed: Random seed
        max_counterexamples: Counterexamples kept per inclusion

    Returns:
        InclusionReport
    """
    _check_graph_patch(domain, r)
    rng = np.random.default_rng(seed)
    d = domain.d

    # First inclusion
    points = _sample_ball(rng, d, r / 2, 2 * n_samples)
    points = points[domain.contains(points)][:n_samples]
    xp = points[:, :-1]
    offset = points - np.column_stack([xp, domain.zeta(xp)])
    ok = (
        (np.linalg.norm(xp, axis=1) < r)
        & _in_sigma(offset)
        & (np.linalg.norm(offset, axis=1) < r)
    )
    first_bad = []
    if not ok.all():
        ticks = np.linspace(-r, r, 41)
        cand = np.stack(
            np.meshgrid(*([ticks] * (d - 1)), indexing="ij"), axis=-1
        ).reshape(-1, d - 1)
        cand = cand[np.linalg.norm(cand, axis=1) < r]
        graph = np.column_stack([cand, domain.zeta(cand)])
        for point in points[~ok]:
            w = point - graph
            if not np.any(_in_sigma(w) & (np.linalg.norm(w, axis=1) < r)):
                first_bad.append(point.tolist())

    # Second inclusion
    base = _sample_ball(rng, d - 1, r, n_samples)
    gamma_points = np.column_stack([base, domain.zeta(base)])
    offsets = _sample_ball(rng, d, r, 4 * n_samples)
    offsets = offsets[_in_sigma(offsets) & (offsets[:, -1] > 0)]
    while len(offsets) < n_samples:
        extra = _sample_ball(rng, d, r, 4 * n_samples)
        offsets = np.concatenate(
            [offsets, extra[_in_sigma(extra) & (extra[:, -1] > 0)]]
        )
    z = gamma_points + offsets[:n_samples]
    ok2 = domain.contains(z) & (np.linalg.norm(z, axis=1) < 3 * r)
    second_bad = z[~ok2].tolist()

    report = InclusionReport(
        r=r,
        n_samples=n_samples,
        first_holds=not first_bad,
        second_holds=not second_bad,
        first_counterexamples=first_bad[:max_counterexamples],
        second_counterexamples=second_bad[:max_counterexamples],
    )
    if not report.holds:
        logger.warning(
            "Graph inclusion failed at r=%g (%d/%d counterexamples)",
            r,
            len(first_bad),
            len(second_bad),
        )
    return report


def verify_sector_lift(
    domain: Domain, r: float, n_samples: int = 10_000, seed: int = 0
) -> InclusionReport:
    """
    Check that xi + r v lies in Omega_{r/2} for xi in Gamma_{r/(36 sqrt 2)}
    and unit v in Sigma.

    The report's first inclusion carries the check; the second is vacuous.
    """
    _check_graph_patch(domain, r)
    rng = np.random.default_rng(seed)
    d = domain.d
    base = _sample_ball(rng, d - 1, r / (36 * math.sqrt(2)), n_samples)
    xi = np.column_stack([base, domain.zeta(base)])
    directions = np.empty((0, d))
    while len(directions) < n_samples:
        batch = _sample_ball(rng, d, 1.0, 4 * n_samples)
        keep = _in_sigma(batch) & (np.linalg.norm(batch, axis=1) > 1e-3)
        directions = np.concatenate([directions, batch[keep]])
    directions = directions[:n_samples]
    directions /= np.linalg.norm(directions, axis=1)[:, None]
    n = min(len(xi), len(directions))
    z = xi[:n] + r * directions[:n]
    inside = domain.contains(z)
    ok = inside.copy()
    if inside.any():
        ok[inside] = distance_to_boundary(domain, z[inside]) > r / 2
    bad = z[~ok].tolist()
    return InclusionReport(
        r=r,
        n_samples=n,
        first_holds=not bad,
        second_holds=True,
        first_counterexamples=bad[:10],
        second_counterexamples=[],
    )
