"""
Nonlocal operators on grid fields.

- projected difference quotient
      D(u)(x, y) = (u(y) - u(x)) / |y - x| . (y - x) / |y - x|
- seminorm |u|^p_{S_rho,p} = int_Omega int_Omega rho(y - x) |D(u)(x, y)|^p
- direction functional F_p[u](h) = int |(u(x + h) - u(x)) . h / |h||^p
- cone matrix Q = int_Lambda s (x) s dH^{d-1}(s)
- matrix mollifier P(z) = d Q^-1 (z (x) z) / |z|^2 chi_{B_1^Lambda}(z),
  P^delta(z) = delta^-d P(z / delta), with int P^delta = I
- smoothing gap ||u - P^delta * u||^p_{L^p(R^d)}

Fields are extended by zero outside Omega. Pair sums run over fixed
row blocks in a fixed order, so results do not depend on the number of
workers.
"""

import logging
import math
import warnings
from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np
from joblib import Parallel, delayed
from scipy import linalg
from scipy.integrate import IntegrationWarning, quad
from scipy.interpolate import RegularGridInterpolator

from .errors import CapabilityError, DomainError, RankError, ResolutionError
from .fields import VectorField, field_hash, sample_field
from .geometry import (
    Cone,
    ball_sector,
    cap_area,
    default_quadrature_size,
    sector_min_constant,
    sphere_quadrature,
)
from .kernels import (
    Kernel,
    ball_integral,
    cone_denominator,
    kernel_hash,
    kernel_values,
)

logger = logging.getLogger(__name__)

# Rows of the pair matrix handled per task
PAIR_CHUNK = 128

# Relative slack allowed between lambda_min(Q) and the sector bound
QUADRATURE_SLACK = 0.02

# Mollifier support must span this many cells
MIN_CELLS_PER_DELTA = 2

ZERO_TOL = 1e-12

EXTENSIONS = ("zero", "periodic", "expression")


# ---------------------------------------------------------------------------
# Difference quotients and seminorms
# ---------------------------------------------------------------------------


def projected_quotient(u: VectorField, i: int, j: int) -> float:
    """
    D(u)(x_i, x_j) for two distinct grid nodes.

    Raises:
        DomainError: If i == j
    """
    if i == j:
        raise DomainError("D(u)(x, y) is undefined for x = y")
    offset = u.grid.nodes[j] - u.grid.nodes[i]
    diff = u.values[j] - u.values[i]
    return float(diff @ offset / (offset @ offset))


def _pair_block(
    values: np.ndarray,
    nodes: np.ndarray,
    weights: np.ndarray,
    kernel: Kernel,
    p: float,
    start: int,
    stop: int,
    projected: bool,
) -> float:
    offsets = nodes[None, :, :] - nodes[start:stop, None, :]
    r2 = np.sum(offsets**2, axis=2)
    off_diagonal = r2 > 0
    diff = values[None, :, :] - values[start:stop, None, :]

    quotient = np.zeros_like(r2)
    if projected:
        quotient[off_diagonal] = (
            np.sum(diff * offsets, axis=2)[off_diagonal] / r2[off_diagonal]
        )
    else:
        quotient[off_diagonal] = np.sqrt(
            np.sum(diff**2, axis=2)[off_diagonal] / r2[off_diagonal]
        )
    rho = np.zeros_like(r2)
    rho[off_diagonal] = kernel_values(kernel, offsets[off_diagonal])
    with np.errstate(over="ignore", invalid="ignore"):
        terms = rho * np.abs(quotient) ** p
        terms = weights[start:stop, None] * terms * weights[None, :]
    return float(np.sum(terms))


def _pair_sum(
    u: VectorField,
    kernel: Kernel,
    p: float,
    projected: bool,
    n_jobs: Optional[int],
) -> float:
    grid = u.grid
    n = grid.n_nodes
    blocks = [(s, min(s + PAIR_CHUNK, n)) for s in range(0, n, PAIR_CHUNK)]
    partials = Parallel(n_jobs=n_jobs, prefer="threads")(
        delayed(_pair_block)(
            u.values, grid.nodes, grid.weights, kernel, p, s, e, projected
        )
        for s, e in blocks
    )
    return float(np.sum(np.asarray(partials)))


@dataclass
class SeminormResult:
    """
    Discretized |u|^p_{S_rho,p}.

    Attributes:
        value_p: Seminorm to the power p
        pair_count: Number of ordered node pairs summed
        diagonal_exclusion_radius: Smallest pair distance (cell width)
        estimated_quadrature_error: |value - coarse value| when requested,
            inf when the pair sum diverged, None otherwise
        h: Cell width
        p: Exponent
        kernel_hash: Hash of the kernel description
        field_hash: Hash of the field values
    """

    value_p: float
    pair_count: int
    diagonal_exclusion_radius: float
    estimated_quadrature_error: Optional[float]
    h: float
    p: float
    kernel_hash: str
    field_hash: str

    @property
    def quadrature_diverged(self) -> bool:
        return self.estimated_quadrature_error == math.inf

    def to_dict(self) -> dict:
        return {
            "value": self.value_p,
            "pair_count": self.pair_count,
            "h": self.h,
            "p": self.p,
            "diagonal_exclusion_radius": self.diagonal_exclusion_radius,
            "estimated_quadrature_error": self.estimated_quadrature_error,
            "quadrature_diverged": self.quadrature_diverged,
            "kernel_hash": self.kernel_hash,
            "field_hash": self.field_hash,
        }


def seminorm(
    u: VectorField,
    kernel: Kernel,
    p: Optional[float] = None,
    error_estimate: bool = False,
    n_jobs: Optional[int] = None,
) -> SeminormResult:
    """
    Discretize |u|^p_{S_rho,p} as a Riemann sum over node pairs.

    Self-pairs are excluded; cell-centred nodes keep every other pair at
    distance >= h.

    Args:
        u: Field on a grid over Omega
        kernel: Locally integrable kernel
        p: Exponent (defaults to the kernel's p)
        error_estimate: Compare with the same expression on the coarsened
            grid (needs an analytic field)
        n_jobs: joblib workers (None uses the active joblib config)

    Returns:
        SeminormResult; a non-finite pair sum is flagged with an infinite
        error estimate instead of raising

    Examples:
        >>> grid = build_grid(box_domain([0], [1]), n_per_axis=64)
        >>> u = sample_field(make_field({"name": "identity"}, 1), grid)
        >>> seminorm(u, indicator_kernel(1, 2.0, radius=1.0)).value_p
        0.984375
    """
    p = kernel.p if p is None else p
    if kernel.d != u.d:
        raise ValueError("Kernel and field dimensions differ")
    value = _pair_sum(u, kernel, p, projected=True, n_jobs=n_jobs)
    grid = u.grid

    error = None
    if not math.isfinite(value):
        logger.warning(
            "Seminorm pair sum diverged for kernel %s at h=%g",
            kernel.name,
            grid.h.min(),
        )
        error = math.inf
    elif error_estimate:
        if u.expr is None:
            raise CapabilityError(
                "Error estimates need a field with an analytic expression"
            )
        coarse = sample_field(u.expr, grid.coarsen())
        coarse_value = _pair_sum(coarse, kernel, p, True, n_jobs)
        error = abs(value - coarse_value)

    return SeminormResult(
        value_p=value,
        pair_count=grid.n_nodes * (grid.n_nodes - 1),
        diagonal_exclusion_radius=float(grid.h.min()),
        estimated_quadrature_error=error,
        h=float(grid.h.max()),
        p=p,
        kernel_hash=kernel_hash(kernel),
        field_hash=field_hash(u),
    )


def full_difference_seminorm(
    u: VectorField,
    kernel: Kernel,
    p: Optional[float] = None,
    n_jobs: Optional[int] = None,
) -> float:
    """
    int int rho(y - x) |u(y) - u(x)|^p / |y - x|^p, the unprojected
    counterpart of :func:`seminorm`; it bounds the seminorm from above and
    does not vanish on rotations.
    """
    p = kernel.p if p is None else p
    return _pair_sum(u, kernel, p, projected=False, n_jobs=n_jobs)


@dataclass
class SymGradReport:
    lhs: float
    rhs: float
    ratio: float
    symgrad_norm_p: float
    kernel_l1: float

    def to_dict(self) -> dict:
        return {
            "lhs": self.lhs,
            "rhs": self.rhs,
            "ratio": self.ratio,
            "symgrad_norm_p": self.symgrad_norm_p,
            "kernel_l1": self.kernel_l1,
        }


def symgrad_norm_p(u: VectorField, p: float, step: float = 1e-6) -> float:
    """||Sym(grad u)||^p_{L^p} by centred differences of the expression."""
    if u.expr is None:
        raise CapabilityError(
            "Sym(grad u) needs a field with an analytic expression"
        )
    grid = u.grid
    d = grid.d
    jacobian = np.empty((grid.n_nodes, d, d))
    for b in range(d):
        e = np.zeros(d)
        e[b] = step
        jacobian[:, :, b] = (
            u.expr(grid.nodes + e) - u.expr(grid.nodes - e)
        ) / (2 * step)
    sym = 0.5 * (jacobian + np.transpose(jacobian, (0, 2, 1)))
    magnitude = np.sqrt(np.sum(sym**2, axis=(1, 2)))
    return float(magnitude**p @ grid.weights)


def symgrad_upper_bound_check(
    u: VectorField,
    kernel: Kernel,
    p: Optional[float] = None,
    n_jobs: Optional[int] = None,
) -> SymGradReport:
    """
    Compare the seminorm with ||Sym(grad u)||^p_{L^p} ||rho||_{L^1}.

    Args:
        u: Field sampled from an analytic expression
        kernel: Integrable kernel (bounded support)
        p: Exponent (defaults to the kernel's p)

    Returns:
        SymGradReport with ratio lhs/rhs (0 when both sides vanish)

    Raises:
        CapabilityError: If u has no expression or rho has unbounded support
    """
    p = kernel.p if p is None else p
    if not math.isfinite(kernel.support_radius):
        raise CapabilityError(
            "The Sym(grad u) bound needs an integrable kernel"
        )
    kernel_l1 = ball_integral(kernel, kernel.support_radius)
    sym = symgrad_norm_p(u, p)
    lhs = seminorm(u, kernel, p, n_jobs=n_jobs).value_p
    rhs = sym * kernel_l1
    if rhs <= ZERO_TOL and lhs <= ZERO_TOL:
        ratio = 0.0
    elif rhs <= ZERO_TOL:
        ratio = math.inf
    else:
        ratio = lhs / rhs
    return SymGradReport(
        lhs=lhs,
        rhs=rhs,
        ratio=ratio,
        symgrad_norm_p=sym,
        kernel_l1=kernel_l1,
    )


# ---------------------------------------------------------------------------
# Shifts and the direction functional
# ---------------------------------------------------------------------------


def _padded_interpolator(u: VectorField, pad: int) -> RegularGridInterpolator:
    grid = u.grid
    return RegularGridInterpolator(
        grid.lattice_axes(pad),
        u.lattice(pad),
        method="linear",
        bounds_error=False,
        fill_value=0.0,
    )


def _reach(grid, length: float) -> int:
    return int(math.ceil(length / grid.h.min())) + 1


def direction_functional_F(
    u: VectorField, h_mag: float, v: Sequence[float], p: float
) -> float:
    """
    F_p[u](h v) = int |(u(x + h v) - u(x)) . v|^p dx with zero extension.

    The integral runs over the lattice covering Omega and Omega - h v;
    off-lattice shifts use multilinear interpolation.

    Args:
        u: Field
        h_mag: Shift length (> 0)
        v: Direction (normalized here)
        p: Exponent

    Returns:
        F_p value
    """
    if h_mag <= 0:
        raise ValueError(f"h_mag must be positive, got {h_mag}")
    v = np.asarray(v, dtype=float)
    v = v / np.linalg.norm(v)
    grid = u.grid
    pad = _reach(grid, h_mag)
    interp = _padded_interpolator(u, pad)
    mesh = np.stack(
        np.meshgrid(*grid.lattice_axes(pad), indexing="ij"), axis=-1
    )
    points = mesh.reshape(-1, grid.d)
    here = u.lattice(pad).reshape(-1, grid.d)
    there = interp(points + h_mag * v)
    return float(
        np.sum(np.abs((there - here) @ v) ** p) * grid.cell_volume
    )


def translation_modulus(
    u: VectorField,
    h: Sequence[float],
    p: float,
    region: Optional[np.ndarray] = None,
) -> float:
    """
    ||u(. + h) - u||_{L^p(region)} with zero extension.

    Args:
        u: Field
        h: Offset vector
        p: Exponent
        region: Node mask of a subset of Omega (default: all nodes)

    Returns:
        The translation modulus
    """
    h = np.asarray(h, dtype=float)
    grid = u.grid
    mask = np.ones(grid.n_nodes, bool) if region is None else region
    norm_h = float(np.linalg.norm(h))
    if norm_h == 0:
        return 0.0
    interp = _padded_interpolator(u, _reach(grid, norm_h))
    shifted = interp(grid.nodes[mask] + h)
    diff = np.linalg.norm(shifted - u.values[mask], axis=1)
    return float((diff**p @ grid.weights[mask]) ** (1.0 / p))


# ---------------------------------------------------------------------------
# Cone matrix and mollifier
# ---------------------------------------------------------------------------


@dataclass
class MollifierMatrix:
    """
    Second-moment matrix of a cone and derived constants.

    Attributes:
        Q: d x d symmetric positive-definite matrix
        Q_inverse: Its inverse
        cone: Direction set
        lambda_min: Smallest eigenvalue of Q
        area: H^{d-1}(Lambda)
        q_inverse_norm: Spectral norm of Q^-1 (= 1 / lambda_min)
        sector_bound: c0 of the sector lemma for p = 2
    """

    Q: np.ndarray
    Q_inverse: np.ndarray
    cone: Cone
    lambda_min: float
    area: float
    q_inverse_norm: float
    sector_bound: float

    @property
    def d(self) -> int:
        return self.cone.d

    def proof_constant(self, p: float) -> float:
        """|Lambda|^p ||Q^-1||^p, the factor of the gap bound chain."""
        return (self.area * self.q_inverse_norm) ** p

    def to_dict(self) -> dict:
        return {
            "Q": self.Q.tolist(),
            "Q_inverse": self.Q_inverse.tolist(),
            "cone": self.cone.to_dict(),
            "lambda_min": self.lambda_min,
            "area": self.area,
            "q_inverse_norm": self.q_inverse_norm,
            "sector_bound": self.sector_bound,
        }


def cone_matrix(cone: Cone, n_points: Optional[int] = None) -> MollifierMatrix:
    """
    Q = int_Lambda s (x) s dH^{d-1}(s) with its inverse and spectrum.

    Args:
        cone: Direction set
        n_points: Sphere quadrature size (default 4096 in d=2, 20000 in d=3)

    Returns:
        MollifierMatrix

    Raises:
        RankError: If Q is numerically singular

    Examples:
        >>> cone_matrix(Cone.full(2)).lambda_min  # pi
        3.14159...
    """
    d = cone.d
    n_points = default_quadrature_size(d) if n_points is None else n_points
    directions, weights = sphere_quadrature(cone, n_points)
    Q = (directions * weights[:, None]).T @ directions
    Q = 0.5 * (Q + Q.T)
    eigenvalues = linalg.eigh(Q, eigvals_only=True)
    lambda_min = float(eigenvalues[0])
    if lambda_min <= 1e-12 * float(np.trace(Q)):
        raise RankError(
            f"Cone matrix is singular (lambda_min={lambda_min:.3g}); "
            "aperture is below quadrature resolution"
        )
    Q_inverse = linalg.solve(Q, np.eye(d), assume_a="pos")
    sector = sector_min_constant(cone, 2.0, n_probe=4096)
    if lambda_min < sector * (1 - QUADRATURE_SLACK):
        logger.warning(
            "lambda_min(Q)=%.6g is below the sector bound %.6g",
            lambda_min,
            sector,
        )
    return MollifierMatrix(
        Q=Q,
        Q_inverse=Q_inverse,
        cone=cone,
        lambda_min=lambda_min,
        area=cap_area(cone),
        q_inverse_norm=1.0 / lambda_min,
        sector_bound=sector,
    )


@dataclass
class MollifierStencil:
    """Lattice offsets (in cells) and matrix weights of P^delta."""

    steps: np.ndarray
    weights: np.ndarray
    normalization_defect: float


def mollifier_stencil(
    mm: MollifierMatrix, delta: float, h: np.ndarray
) -> MollifierStencil:
    """
    Discretize P^delta on the lattice h Z^d.

    Weights are d delta^-d h^d Q^-1 (z z^T) / |z|^2 over the lattice points
    of B^Lambda_delta, left-multiplied by the inverse of their sum so the
    discrete integral is exactly I. The raw deviation ||sum - I|| is kept
    as normalization_defect.

    Raises:
        ResolutionError: If delta < 2 h
    """
    h = np.asarray(h, dtype=float)
    if delta < MIN_CELLS_PER_DELTA * h.max() * (1 - 1e-12):
        raise ResolutionError(
            f"delta={delta:g} is below {MIN_CELLS_PER_DELTA} cells "
            f"(h={h.max():g})"
        )
    d = mm.d
    offsets = ball_sector(mm.cone, delta, h)
    if len(offsets) == 0:
        raise ResolutionError("No lattice points in the mollifier sector")
    r2 = np.sum(offsets**2, axis=1)
    outer = offsets[:, :, None] * offsets[:, None, :] / r2[:, None, None]
    raw = d * delta ** (-d) * np.prod(h) * (mm.Q_inverse @ outer)
    total = raw.sum(axis=0)
    defect = float(np.linalg.norm(total - np.eye(d)))
    if defect > 1e-3:
        logger.debug("Raw mollifier sum deviates from I by %.3g", defect)
    weights = linalg.solve(total, np.eye(d)) @ raw
    steps = np.rint(offsets / h).astype(int)
    return MollifierStencil(steps, weights, defect)


def _convolve_lattice(
    source: np.ndarray, stencil: MollifierStencil, reach: int
) -> np.ndarray:
    """sum_k W_k source[idx - k] on the interior of a reach-padded array."""
    d = stencil.steps.shape[1]
    inner = tuple(s - 2 * reach for s in source.shape[:d])
    out = np.zeros(inner + (d,))
    for step, weight in zip(stencil.steps, stencil.weights):
        window = tuple(
            slice(reach - k, reach - k + n) for k, n in zip(step, inner)
        )
        out += source[window] @ weight.T
    return out


def _extended_lattice(
    u: VectorField, pad: int, extension: str
) -> np.ndarray:
    grid = u.grid
    if extension == "zero":
        return u.lattice(pad)
    if extension == "periodic":
        if grid.domain.shape != "box":
            raise CapabilityError("Periodic extension needs a box domain")
        width = [(pad, pad)] * grid.d + [(0, 0)]
        return np.pad(u.lattice(0), width, mode="wrap")
    if extension == "expression":
        if u.expr is None:
            raise CapabilityError(
                "Expression extension needs an analytic field"
            )
        mesh = np.stack(
            np.meshgrid(*grid.lattice_axes(pad), indexing="ij"), axis=-1
        )
        values = u.expr(mesh.reshape(-1, grid.d))
        return values.reshape(mesh.shape)
    raise ValueError(
        f"Unknown extension '{extension}'. Must be one of: {list(EXTENSIONS)}"
    )


def mollify_lattice(
    u: VectorField,
    delta: float,
    mm: MollifierMatrix,
    pad: int = 0,
    extension: str = "zero",
) -> np.ndarray:
    """
    P^delta * u on the bounding-box lattice extended by ``pad`` cells.

    Returns:
        Array of shape (*(shape + 2 pad), d)
    """
    grid = u.grid
    if mm.d != grid.d:
        raise ValueError("Mollifier and field dimensions differ")
    stencil = mollifier_stencil(mm, delta, grid.h)
    reach = int(np.abs(stencil.steps).max())
    source = _extended_lattice(u, pad + reach, extension)
    return _convolve_lattice(source, stencil, reach)


def mollify(
    u: VectorField,
    delta: float,
    mm: MollifierMatrix,
    extension: str = "zero",
) -> VectorField:
    """
    Node-wise P^delta * u.

    Args:
        u: Field
        delta: Mollifier radius (>= 2 h)
        mm: Cone matrix
        extension: How u is continued outside Omega: "zero" (default),
            "periodic" (box domains) or "expression" (analytic fields)

    Returns:
        Mollified VectorField on the same grid

    Raises:
        ResolutionError: If delta < 2 h
    """
    lattice = mollify_lattice(u, delta, mm, extension=extension)
    values = lattice[tuple(u.grid.index.T)]
    return VectorField(u.grid, values, label=f"P^{delta:g}*{u.label}")


def smoothing_gap(
    u: VectorField,
    delta: float,
    mm: MollifierMatrix,
    p: float,
) -> float:
    """
    ||u - P^delta * u||^p_{L^p(R^d)} with zero extension.

    The integral runs over the bounding-box lattice extended by the
    mollifier reach, which carries the support of P^delta * u.
    """
    grid = u.grid
    stencil = mollifier_stencil(mm, delta, grid.h)
    reach = int(np.abs(stencil.steps).max())
    mollified = _convolve_lattice(u.lattice(2 * reach), stencil, reach)
    diff = u.lattice(reach) - mollified
    magnitude = np.linalg.norm(diff, axis=-1)
    return float(np.sum(magnitude**p) * grid.cell_volume)


# ---------------------------------------------------------------------------
# Bound chains
# ---------------------------------------------------------------------------


@dataclass
class GapChainReport:
    """Measured smoothing gap against the Jensen bound chain."""

    delta: float
    gap: float
    bound: float
    proof_constant: float

    @property
    def ratio(self) -> float:
        return self.gap / self.bound if self.bound > 0 else math.inf

    def to_dict(self) -> dict:
        return {
            "delta": self.delta,
            "gap": self.gap,
            "bound": self.bound,
            "proof_constant": self.proof_constant,
            "ratio": self.ratio if self.bound > 0 else None,
        }


def gap_chain_bound(
    u: VectorField,
    delta: float,
    mm: MollifierMatrix,
    p: float,
    n_radial: int = 16,
    n_directions: Optional[int] = None,
) -> GapChainReport:
    """
    Evaluate |Lambda|^p ||Q^-1||^p / |B^Lambda_delta|
    int_0^delta int_Lambda t^{d-1} F_p[u](t v) dH(v) dt next to the gap.

    The radial integral uses Gauss-Legendre nodes, the angular one the
    cone's sphere quadrature.
    """
    d = u.d
    if n_directions is None:
        n_directions = {1: 8, 2: 64, 3: 256}[d]
    directions, dir_weights = sphere_quadrature(mm.cone, n_directions)
    nodes, node_weights = np.polynomial.legendre.leggauss(n_radial)
    radii = 0.5 * delta * (nodes + 1)
    radial_weights = 0.5 * delta * node_weights

    integral = 0.0
    for t, wt in zip(radii, radial_weights):
        for v, wv in zip(directions, dir_weights):
            integral += (
                wt * wv * t ** (d - 1) * direction_functional_F(u, t, v, p)
            )
    sector_volume = mm.area * delta**d / d
    constant = mm.proof_constant(p)
    return GapChainReport(
        delta=delta,
        gap=smoothing_gap(u, delta, mm, p),
        bound=constant * integral / sector_volume,
        proof_constant=constant,
    )


@dataclass
class DirectionRatio:
    """F_p[u](t v) against its bound from the direction-functional lemma."""

    t: float
    delta: float
    numerator: float
    denominator: float

    @property
    def ratio(self) -> float:
        if self.denominator <= 0:
            return 0.0 if self.numerator <= 0 else math.inf
        return self.numerator / self.denominator

    def to_dict(self) -> dict:
        return {
            "t": self.t,
            "delta": self.delta,
            "numerator": self.numerator,
            "denominator": self.denominator,
            "ratio": self.ratio,
        }


def est_for_f_ratio(
    u: VectorField,
    kernel: Kernel,
    v: Sequence[float],
    t: float,
    delta: float,
    theta0: float,
    p: Optional[float] = None,
    cone: Optional[Cone] = None,
) -> DirectionRatio:
    """
    Ratio F_p[u](t v) / [delta^p (int_0^delta rho_theta0(s v0) s^{d-1}
    ds)^-1 int_0^D rho(h v) h^{d-1} F_p[u](h v) h^-p dh].

    The outer integral is truncated at the diameter D of the grid's
    bounding box, beyond which the zero-extended F_p is constant.
    """
    p = kernel.p if p is None else p
    if not 0 < t < delta:
        raise ValueError(f"t must lie in (0, delta), got t={t}")
    v = np.asarray(v, dtype=float)
    v = v / np.linalg.norm(v)
    cone = Cone.full(kernel.d) if cone is None else cone
    grid = u.grid
    diameter = float(np.linalg.norm(np.asarray(grid.shape) * grid.h))

    def integrand(h: float) -> float:
        if h <= 0:
            return 0.0
        rho = kernel_values(kernel, (h * v)[None, :])[0]
        if rho == 0:
            return 0.0
        return rho * h ** (kernel.d - 1 - p) * direction_functional_F(
            u, h, v, p
        )

    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", IntegrationWarning)
        outer, _ = quad(integrand, 0.0, diameter, limit=200, epsrel=1e-6)
    for warning in caught:
        logger.warning("F_p outer integral: %s", warning.message)

    inner = cone_denominator(kernel, theta0, cone, delta)
    denominator = delta**p / inner * outer if inner > 0 else math.inf
    return DirectionRatio(
        t=t,
        delta=delta,
        numerator=direction_functional_F(u, t, v, p),
        denominator=denominator,
    )


def f_curve(
    u: VectorField,
    v: Sequence[float],
    p: float,
    lengths: Union[Sequence[float], np.ndarray],
) -> list:
    """(t, F_p[u](t v)) samples along a direction."""
    return [
        (float(t), direction_functional_F(u, float(t), v, p))
        for t in lengths
    ]
