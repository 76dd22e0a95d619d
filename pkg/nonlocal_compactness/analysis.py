"""
Experiment-level procedures.

The one-dimensional boundary lemma with its explicit constant, near-boundary
mass control, Poincare-Korn constants on constrained subspaces, and the
kernel-sequence and compactness-probe harnesses that sweep (n, delta)
cells and classify what they see.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Union

import numpy as np
from joblib import Parallel, delayed
from scipy import linalg, optimize
from scipy.integrate import trapezoid
from scipy.sparse.linalg import LinearOperator, eigsh

from .errors import (
    CapabilityError,
    HypothesisViolatedError,
    RankError,
    ResolutionError,
)
from .fields import (
    SubspaceSpec,
    VectorField,
    check_transversal,
    constraint_matrix,
    field_hash,
    make_sequence,
    sequence_label,
)
from .geometry import Cone, Grid, interior_subset
from .kernels import (
    THETA_GRID,
    Kernel,
    ball_integral,
    check_cone_condition,
    check_mass_ratio_limit,
    check_radial_monotone,
    cone_denominator,
    kernel_family,
    kernel_values,
    mass_ratio,
)
from .operators import PAIR_CHUNK, cone_matrix, seminorm, smoothing_gap

logger = logging.getLogger(__name__)

# Ponce lemma
PONCE_SAMPLES_PER_DELTA = 64
PONCE_TOL = 1e-2
PONCE_REFINE = 8

# Boundary lemma
EPSILON0 = 1.0 / 16
EPSILON0_MAX = 1.0 / 8

# Poincare estimation
DENSE_LIMIT = 4096
EIGEN_FLOOR = 1e-12
DEFAULT_RESTARTS = 10

# Experiments
DEFAULT_N_VALUES = tuple(range(1, 9))
GROWTH_LIMIT = 1e3
GAP_THRESHOLD = 0.05
COLLAR_THRESHOLD = 0.05
NULL_SEMINORM_TOL = 1e-12

VERDICTS = ("no_obstruction", "concentration_detected", "oscillation_detected")


# ---------------------------------------------------------------------------
# One-dimensional boundary lemma
# ---------------------------------------------------------------------------


def ponce_constant(p: float) -> float:
    """C = 2^(2p - 1) of the one-dimensional boundary lemma."""
    return 2.0 ** (2 * p - 1)


@dataclass
class PonceReport:
    lhs: float
    rhs: float
    holds: bool
    constant: float
    delta: float
    t: float
    p: float

    def to_dict(self) -> dict:
        return {
            "lhs": self.lhs,
            "rhs": self.rhs,
            "holds": self.holds,
            "constant": self.constant,
            "delta": self.delta,
            "t": self.t,
            "p": self.p,
        }


def _segment_integral(
    xs: np.ndarray, a: float, b: float, func: Callable
) -> float:
    n_fine = PONCE_REFINE * max(int(np.sum((xs >= a) & (xs <= b))), 2) + 1
    fine = np.linspace(a, b, n_fine)
    return float(trapezoid(func(fine), fine))


def ponce_1d_check(
    g: Union[Sequence[float], np.ndarray],
    delta: float,
    t: float,
    p: float,
) -> PonceReport:
    """
    Check int_0^delta |g|^p <= C delta^p int_0^{2 delta}
    |g(x + t) - g(x)|^p / t^p dx + 2^(p-1) int_delta^{3 delta} |g|^p
    with C = 2^(2p - 1).

    Args:
        g: Samples of g on a uniform grid over [0, 3 delta], at least
            PONCE_SAMPLES_PER_DELTA per delta; g is taken piecewise linear
        delta: Scale (> 0)
        t: Shift in (0, delta)
        p: Exponent (>= 1)

    Returns:
        PonceReport; holds allows a relative quadrature slack of PONCE_TOL

    Examples:
        >>> xs = np.linspace(0, 3, 193)
        >>> ponce_1d_check(xs, delta=1.0, t=0.5, p=1.0).holds  # 0.5 <= 8
        True
    """
    g = np.asarray(g, dtype=float)
    if delta <= 0:
        raise ValueError(f"delta must be positive, got {delta}")
    if not 0 < t < delta:
        raise ValueError(f"t must lie in (0, delta), got t={t}")
    if p < 1:
        raise ValueError(f"p >= 1 required, got p={p}")
    if (len(g) - 1) < 3 * PONCE_SAMPLES_PER_DELTA:
        raise ValueError(
            f"g needs at least {PONCE_SAMPLES_PER_DELTA} samples per delta"
        )
    xs = np.linspace(0.0, 3 * delta, len(g))

    def value(x):
        return np.interp(x, xs, g)

    lhs = _segment_integral(
        xs, 0.0, delta, lambda x: np.abs(value(x)) ** p
    )
    shift = _segment_integral(
        xs,
        0.0,
        2 * delta,
        lambda x: np.abs(value(x + t) - value(x)) ** p / t**p,
    )
    tail = _segment_integral(
        xs, delta, 3 * delta, lambda x: np.abs(value(x)) ** p
    )
    constant = ponce_constant(p)
    rhs = constant * delta**p * shift + 2.0 ** (p - 1) * tail
    return PonceReport(
        lhs=lhs,
        rhs=rhs,
        holds=bool(lhs <= rhs * (1 + PONCE_TOL)),
        constant=constant,
        delta=delta,
        t=t,
        p=p,
    )


def ponce_randomized_audit(n_trials: int = 1000, seed: int = 0) -> list:
    """
    Run ponce_1d_check on random piecewise-linear g and random
    (delta, t, p).

    Returns:
        List of PonceReport, one per trial
    """
    rng = np.random.default_rng(seed)
    reports = []
    for _ in range(n_trials):
        delta = float(10 ** rng.uniform(-2, 1))
        t = float(rng.uniform(0.01, 0.99) * delta)
        p = float(rng.uniform(1.0, 4.0))
        n_knots = int(rng.integers(2, 13))
        knots = np.sort(rng.uniform(0, 3 * delta, n_knots))
        knots = np.concatenate([[0.0], knots, [3 * delta]])
        heights = rng.standard_normal(len(knots))
        xs = np.linspace(0, 3 * delta, 3 * PONCE_SAMPLES_PER_DELTA + 1)
        reports.append(
            ponce_1d_check(np.interp(xs, knots, heights), delta, t, p)
        )
    failures = sum(not r.holds for r in reports)
    if failures:
        logger.warning(
            "Ponce audit: %d of %d trials failed", failures, n_trials
        )
    return reports


# ---------------------------------------------------------------------------
# Near-boundary mass control
# ---------------------------------------------------------------------------


@dataclass
class BoundaryMassReport:
    """
    Terms of the near-boundary inequality
    int_Omega |u|^p <= C1 int_{Omega_{eps0 r}} |u|^p
                       + C2 r^p / int_{B_r} rho |u|^p_S.

    Attributes:
        r: Radius
        epsilon0: Collar fraction
        lhs: int_Omega |u|^p
        interior_term: int over Omega_{eps0 r}
        seminorm_term: r^p / int_{B_r} rho times the seminorm
        implied_C2: (lhs - C1 interior_term) / seminorm_term, None when
            seminorm_term vanishes; negative when the interior term alone
            bounds lhs
        C1: |Omega| / |Omega_{eps0 r}|
        collar_term: int over Omega minus Omega_{2 eps0 r}
        implied_collar_constant: collar_term / seminorm_term
        vanishes_inside: Whether u vanishes on Omega_{r/2}
    """

    r: float
    epsilon0: float
    lhs: float
    interior_term: float
    seminorm_term: float
    implied_C2: Optional[float]
    C1: float
    collar_term: float
    implied_collar_constant: Optional[float]
    vanishes_inside: bool

    def to_dict(self) -> dict:
        return {
            "r": self.r,
            "epsilon0": self.epsilon0,
            "lhs": self.lhs,
            "interior_term": self.interior_term,
            "seminorm_term": self.seminorm_term,
            "implied_C2": self.implied_C2,
            "C1": self.C1,
            "collar_term": self.collar_term,
            "implied_collar_constant": self.implied_collar_constant,
            "vanishes_inside": self.vanishes_inside,
        }


def default_r0(grid: Grid) -> float:
    domain = grid.domain
    if domain.shape == "graph_patch":
        return domain.r0
    return domain.inradius / 4


def boundary_mass_check(
    u: VectorField,
    kernel: Kernel,
    r: float,
    epsilon0: float = EPSILON0,
    p: Optional[float] = None,
    r0: Optional[float] = None,
    n_jobs: Optional[int] = None,
) -> BoundaryMassReport:
    """
    Evaluate every term of the near-boundary inequality for one radius.

    Args:
        u: Field
        kernel: Radial kernel
        r: Radius in (0, r0)
        epsilon0: Collar fraction, at most 1/8
        p: Exponent (defaults to the kernel's p)
        r0: Upper radius (default: patch radius for graph patches,
            inradius / 4 otherwise)

    Returns:
        BoundaryMassReport

    Raises:
        CapabilityError: If the kernel is not radial
        ResolutionError: If Omega_{eps0 r} holds no grid node
    """
    if not kernel.is_radial:
        raise CapabilityError(
            "Boundary mass control requires a radial kernel"
        )
    p = kernel.p if p is None else p
    if not 0 < epsilon0 <= EPSILON0_MAX:
        raise ValueError(
            f"epsilon0 must lie in (0, {EPSILON0_MAX}], got {epsilon0}"
        )
    grid = u.grid
    r0 = default_r0(grid) if r0 is None else r0
    if not 0 < r < r0:
        raise ValueError(f"r must lie in (0, {r0:g}), got {r}")

    interior = interior_subset(grid, epsilon0 * r)
    if not interior.any():
        raise ResolutionError(
            f"Omega_{epsilon0 * r:g} contains no nodes at h={grid.h.max():g}"
        )
    lhs = u.lp_norm_p(p)
    interior_term = u.lp_norm_p(p, interior)
    C1 = grid.volume / float(grid.weights[interior].sum())
    collar = ~interior_subset(grid, 2 * epsilon0 * r)
    collar_term = u.lp_norm_p(p, collar)

    semi = seminorm(u, kernel, p, n_jobs=n_jobs).value_p
    seminorm_term = r**p / ball_integral(kernel, r) * semi

    implied_C2 = implied_collar = None
    if seminorm_term > 0:
        implied_C2 = (lhs - C1 * interior_term) / seminorm_term
        implied_collar = collar_term / seminorm_term
    inside = interior_subset(grid, r / 2)
    vanishes = bool(np.all(u.values[inside] == 0))

    logger.info(
        "Boundary mass r=%g: lhs=%.4g C1=%.4g implied_C2=%s",
        r,
        lhs,
        C1,
        implied_C2,
    )
    return BoundaryMassReport(
        r=r,
        epsilon0=epsilon0,
        lhs=lhs,
        interior_term=interior_term,
        seminorm_term=seminorm_term,
        implied_C2=implied_C2,
        C1=C1,
        collar_term=collar_term,
        implied_collar_constant=implied_collar,
        vanishes_inside=vanishes,
    )


# ---------------------------------------------------------------------------
# Poincare-Korn constants
# ---------------------------------------------------------------------------


@dataclass
class PoincareEstimate:
    """
    Estimated best C in int |u|^p <= C |u|^p_S on a subspace V.

    Attributes:
        constant: Estimated constant (a lower bound when lower_bound)
        minimizer_hash: field_hash of the unit-norm minimizer
        grid_h: Cell width
        method: dense_eigen, matrix_free_eigen or rayleigh_descent
        refinement_drift: |C - C_coarse| / C against the coarsened grid
        lower_bound: True for the descent path
        restarts: Number of descent restarts (0 for eigen paths)
        p: Exponent
    """

    constant: float
    minimizer_hash: str
    grid_h: float
    method: str
    refinement_drift: Optional[float]
    lower_bound: bool
    restarts: int
    p: float
    minimizer: Optional[VectorField] = field(default=None, repr=False)

    def to_dict(self) -> dict:
        return {
            "constant": self.constant,
            "minimizer_hash": self.minimizer_hash,
            "grid_h": self.grid_h,
            "method": self.method,
            "refinement_drift": self.refinement_drift,
            "lower_bound": self.lower_bound,
            "restarts": self.restarts,
            "p": self.p,
        }


def _pair_rows(grid: Grid, kernel: Kernel, start: int, stop: int):
    """
    Symmetrized pair weights s_ij = w_i w_j (rho(x_j - x_i) +
    rho(x_i - x_j)) and scaled offsets a_ij = (x_j - x_i) / |x_j - x_i|^2
    for rows start:stop.
    """
    nodes, weights = grid.nodes, grid.weights
    offsets = nodes[None, :, :] - nodes[start:stop, None, :]
    r2 = np.sum(offsets**2, axis=2)
    off_diagonal = r2 > 0
    scaled = np.zeros_like(offsets)
    scaled[off_diagonal] = offsets[off_diagonal] / r2[off_diagonal][:, None]
    rho = np.zeros_like(r2)
    rho[off_diagonal] = kernel_values(
        kernel, offsets[off_diagonal]
    ) + kernel_values(kernel, -offsets[off_diagonal])
    s = weights[start:stop, None] * rho * weights[None, :]
    return s, scaled


def quadratic_form(grid: Grid, kernel: Kernel) -> np.ndarray:
    """
    Dense matrix K with u^T K u = |u|^2_{S_rho,2} on node-major fields.

    Returns:
        Array of shape (N d, N d)
    """
    n, d = grid.n_nodes, grid.d
    K = np.zeros((n * d, n * d))
    for start in range(0, n, PAIR_CHUNK):
        stop = min(start + PAIR_CHUNK, n)
        s, a = _pair_rows(grid, kernel, start, stop)
        blocks = -s[:, :, None, None] * a[:, :, :, None] * a[:, :, None, :]
        diagonal = -blocks.sum(axis=1)
        rows = blocks.transpose(0, 2, 1, 3).reshape((stop - start) * d, -1)
        K[start * d:stop * d] = rows
        for i in range(start, stop):
            K[i * d:(i + 1) * d, i * d:(i + 1) * d] = diagonal[i - start]
    return K


def _form_matvec(grid: Grid, kernel: Kernel, u: np.ndarray) -> np.ndarray:
    """K u without assembling K: (K u)_i = sum_j s_ij A_ij (u_i - u_j)."""
    n, d = grid.n_nodes, grid.d
    values = u.reshape(n, d)
    out = np.empty((n, d))
    for start in range(0, n, PAIR_CHUNK):
        stop = min(start + PAIR_CHUNK, n)
        s, a = _pair_rows(grid, kernel, start, stop)
        diff = values[start:stop, None, :] - values[None, :, :]
        projected = np.sum(a * diff, axis=2)
        out[start:stop] = np.sum((s * projected)[:, :, None] * a, axis=1)
    return out.ravel()


def _canonical_sign(values: np.ndarray) -> np.ndarray:
    flat = values.ravel()
    pivot = flat[np.argmax(np.abs(flat))]
    return values if pivot >= 0 else -values


def _unit_minimizer(
    grid: Grid, flat: np.ndarray, p: float
) -> VectorField:
    values = flat.reshape(grid.n_nodes, grid.d)
    norm = float(np.linalg.norm(values, axis=1) ** p @ grid.weights)
    values = _canonical_sign(values / norm ** (1.0 / p))
    return VectorField(grid, values, label="poincare_minimizer")


def _poincare_dense(spec: SubspaceSpec, kernel: Kernel, grid: Grid):
    K = quadratic_form(grid, kernel)
    mass = np.repeat(grid.weights, grid.d)
    Z = linalg.null_space(constraint_matrix(spec, grid))
    reduced_K = Z.T @ K @ Z
    reduced_M = (Z.T * mass) @ Z
    reduced_K = 0.5 * (reduced_K + reduced_K.T)
    reduced_M = 0.5 * (reduced_M + reduced_M.T)
    eigenvalues, vectors = linalg.eigh(
        reduced_K, reduced_M, subset_by_index=[0, 0]
    )
    return float(eigenvalues[0]), Z @ vectors[:, 0]


def _poincare_matrix_free(
    spec: SubspaceSpec, kernel: Kernel, grid: Grid, seed: int
):
    """
    Smallest eigenvalue of M^-1/2 K M^-1/2 on the constrained subspace.

    The constraint complement is shifted to twice the Rayleigh quotient
    of a projected start vector, which exceeds lambda_min.
    """
    n_dof = grid.n_nodes * grid.d
    root_mass = np.sqrt(np.repeat(grid.weights, grid.d))
    C = constraint_matrix(spec, grid) / root_mass
    gram = linalg.cho_factor(C @ C.T)

    def project(v):
        return v - C.T @ linalg.cho_solve(gram, C @ v)

    def apply_form(v):
        return _form_matvec(grid, kernel, v / root_mass) / root_mass

    rng = np.random.default_rng(seed)
    start = project(rng.standard_normal(n_dof))
    shift = 2 * float(start @ apply_form(start)) / float(start @ start)

    def matvec(v):
        v = np.ravel(v)
        inside = project(v)
        return project(apply_form(inside)) + shift * (v - inside)

    operator = LinearOperator((n_dof, n_dof), matvec=matvec, dtype=float)
    eigenvalues, vectors = eigsh(
        operator, k=1, which="SA", v0=start, tol=1e-10
    )
    return float(eigenvalues[0]), project(vectors[:, 0]) / root_mass


def _poincare_descent(
    spec: SubspaceSpec,
    kernel: Kernel,
    grid: Grid,
    p: float,
    restarts: int,
    seed: int,
):
    """Minimize |u|^p_S / ||u||^p_p over V with L-BFGS from random starts."""
    n, d = grid.n_nodes, grid.d
    s, a = _pair_rows(grid, kernel, 0, n)
    weights = grid.weights
    C = constraint_matrix(spec, grid)
    gram = linalg.cho_factor(C @ C.T)

    def project(v):
        return v - C.T @ linalg.cho_solve(gram, C @ v)

    def objective(y):
        u = project(y).reshape(n, d)
        diff = u[None, :, :] - u[:, None, :]
        D = np.sum(a * diff, axis=2)
        absD = np.abs(D)
        semi = 0.5 * float(np.sum(s * absD**p))
        magnitude = np.linalg.norm(u, axis=1)
        norm = float(weights @ magnitude**p)
        if norm == 0:
            return math.inf, np.zeros_like(y)
        flux = s * np.sign(D) * absD ** (p - 1)
        grad_semi = -p * np.sum(flux[:, :, None] * a, axis=1)
        with np.errstate(invalid="ignore", divide="ignore"):
            scale = np.where(magnitude > 0, magnitude ** (p - 2), 0.0)
        grad_norm = p * (weights * scale)[:, None] * u
        ratio = semi / norm
        grad = (grad_semi - ratio * grad_norm) / norm
        return ratio, project(grad.ravel())

    rng = np.random.default_rng(seed)
    best_ratio, best = math.inf, None
    for _ in range(restarts):
        start = project(rng.standard_normal(n * d))
        result = optimize.minimize(
            objective,
            start,
            jac=True,
            method="L-BFGS-B",
            options={"maxiter": 500},
        )
        if result.fun < best_ratio:
            best_ratio, best = float(result.fun), project(result.x)
    return best_ratio, best


def poincare_constant(
    spec: SubspaceSpec,
    kernel: Kernel,
    p: float,
    grid: Grid,
    seed: int = 0,
    restarts: int = DEFAULT_RESTARTS,
    refine: bool = True,
) -> PoincareEstimate:
    """
    Estimate the best constant C with int |u|^p <= C |u|^p_S on V.

    For p = 2 the seminorm's quadratic form is restricted to V and C is
    the reciprocal of its smallest generalized eigenvalue against the
    mass matrix (dense up to DENSE_LIMIT unknowns, matrix-free beyond).
    For other p the Rayleigh quotient is minimized by projected L-BFGS
    from random restarts, which gives a lower bound on C.

    Args:
        spec: Constraints defining V
        kernel: Kernel
        p: Exponent
        grid: Grid
        seed: Seed for start vectors
        restarts: Descent restarts (general p)
        refine: Also estimate on the coarsened grid for refinement_drift

    Returns:
        PoincareEstimate

    Raises:
        RankError: If V meets the rigid motions or the smallest eigenvalue
            is below EIGEN_FLOOR
    """
    check_transversal(spec, grid)
    n_dof = grid.n_nodes * grid.d
    if p == 2:
        if n_dof <= DENSE_LIMIT:
            eigenvalue, vector = _poincare_dense(spec, kernel, grid)
            method = "dense_eigen"
        else:
            eigenvalue, vector = _poincare_matrix_free(
                spec, kernel, grid, seed
            )
            method = "matrix_free_eigen"
        restarts_used = 0
    else:
        eigenvalue, vector = _poincare_descent(
            spec, kernel, grid, p, restarts, seed
        )
        method = "rayleigh_descent"
        restarts_used = restarts

    if not eigenvalue > EIGEN_FLOOR:
        raise RankError(
            f"Smallest constrained eigenvalue {eigenvalue:.3g} is below "
            f"{EIGEN_FLOOR:g}: V meets the rigid motions at this grid"
        )
    constant = 1.0 / eigenvalue
    minimizer = _unit_minimizer(grid, vector, p)

    drift = None
    if refine:
        coarse_grid = grid.coarsen()
        coarse = poincare_constant(
            spec, kernel, p, coarse_grid, seed, restarts, refine=False
        )
        drift = abs(constant - coarse.constant) / constant

    logger.info(
        "Poincare constant (%s, p=%g, h=%g): %.6g",
        method,
        p,
        grid.h.max(),
        constant,
    )
    return PoincareEstimate(
        constant=constant,
        minimizer_hash=field_hash(minimizer),
        grid_h=float(grid.h.max()),
        method=method,
        refinement_drift=drift,
        lower_bound=p != 2,
        restarts=restarts_used,
        p=p,
        minimizer=minimizer,
    )


# ---------------------------------------------------------------------------
# Sequence experiments
# ---------------------------------------------------------------------------


@dataclass
class CompactnessReport:
    """
    Diagnostics of a field sequence against the compactness criteria.

    Attributes:
        sequence_id: Label of the sequence
        sup_seminorm: sup_n |u_n|^p_S
        gap_curve: (delta, sup_n smoothing gap) pairs
        boundary_mass_curve: (tau, sup_n int_{Omega minus Omega_tau}
            |u_n|^p) pairs
        verdict: One of VERDICTS, None when a hypothesis failed
        n_values: Sequence indices
        seminorms: |u_n|^p_S per index
        sup_norm_p: sup_n ||u_n||^p_p
        bound_curve: (delta, predicted bound) pairs
        envelope_constant: Single constant bounding every measured gap
            (compactness probes)
        hypotheses: Verdicts of the kernel checks
        hypothesis_violated: Seminorm growth exceeded GROWTH_LIMIT
        growth_factor: max_n seminorm / min_n seminorm
        dropped_deltas: Deltas below two cells
        collar_fraction_curve: (tau, sup_n collar share of ||u_n||^p)
            pairs behind the concentration verdict
        null_seminorm_n: Indices whose seminorm vanishes; they are left
            out of envelope_constant
    """

    sequence_id: str
    sup_seminorm: float
    gap_curve: list
    boundary_mass_curve: list
    verdict: Optional[str]
    n_values: list = field(default_factory=list)
    seminorms: list = field(default_factory=list)
    sup_norm_p: float = 0.0
    bound_curve: list = field(default_factory=list)
    envelope_constant: Optional[float] = None
    hypotheses: dict = field(default_factory=dict)
    hypothesis_violated: bool = False
    growth_factor: float = 1.0
    dropped_deltas: list = field(default_factory=list)
    collar_fraction_curve: list = field(default_factory=list)
    null_seminorm_n: list = field(default_factory=list)

    def raise_for_hypothesis(self) -> None:
        """Raise HypothesisViolatedError if the seminorms were unbounded."""
        if self.hypothesis_violated:
            raise HypothesisViolatedError(
                f"Seminorms of {self.sequence_id} grew by a factor of "
                f"{self.growth_factor:.4g} (limit {GROWTH_LIMIT:g})"
            )

    def to_dict(self) -> dict:
        return {
            "sequence_id": self.sequence_id,
            "sup_seminorm": self.sup_seminorm,
            "gap_curve": [list(c) for c in self.gap_curve],
            "boundary_mass_curve": [
                list(c) for c in self.boundary_mass_curve
            ],
            "verdict": self.verdict,
            "n_values": self.n_values,
            "seminorms": self.seminorms,
            "sup_norm_p": self.sup_norm_p,
            "bound_curve": [list(c) for c in self.bound_curve],
            "envelope_constant": self.envelope_constant,
            "hypotheses": self.hypotheses,
            "hypothesis_violated": self.hypothesis_violated,
            "growth_factor": self.growth_factor,
            "dropped_deltas": self.dropped_deltas,
            "collar_fraction_curve": [
                list(c) for c in self.collar_fraction_curve
            ],
            "null_seminorm_n": self.null_seminorm_n,
        }


def experiment_deltas(
    grid: Grid, deltas: Optional[Sequence[float]] = None
) -> tuple[list, list]:
    """
    Split a delta list into usable values (>= 2 h) and dropped ones.

    The default list is 2^-j for j = 1..12.
    """
    if deltas is None:
        deltas = [2.0**-j for j in range(1, 13)]
    floor = 2 * float(grid.h.max()) * (1 - 1e-12)
    kept = [float(x) for x in deltas if x >= floor]
    dropped = [float(x) for x in deltas if x < floor]
    if dropped:
        logger.warning(
            "Dropping deltas below two cells (h=%g): %s",
            grid.h.max(),
            dropped,
        )
    if not kept:
        raise ResolutionError(
            f"No delta is at least two cells wide (h={grid.h.max():g})"
        )
    return kept, dropped


def collar_taus(grid: Grid) -> list:
    """tau = h 2^k up to half the inradius."""
    h = float(grid.h.max())
    top = grid.domain.inradius / 2
    taus = []
    tau = h
    while tau <= top * (1 + 1e-12):
        taus.append(tau)
        tau *= 2
    return taus or [h]


def boundary_mass_curve(fields: Sequence[VectorField], p: float) -> list:
    """(tau, sup_n int_{Omega minus Omega_tau} |u_n|^p) over collar_taus."""
    grid = fields[0].grid
    curve = []
    for tau in collar_taus(grid):
        collar = ~interior_subset(grid, tau)
        curve.append((tau, max(u.lp_norm_p(p, collar) for u in fields)))
    return curve


def collar_fraction_curve(
    fields: Sequence[VectorField], p: float
) -> list:
    """
    (tau, sup_n of the share of ||u_n||^p in Omega minus Omega_tau).

    Members with zero norm (a bump that has left Omega) are skipped.
    """
    grid = fields[0].grid
    totals = [u.lp_norm_p(p) for u in fields]
    curve = []
    for tau in collar_taus(grid):
        collar = ~interior_subset(grid, tau)
        shares = [
            u.lp_norm_p(p, collar) / total
            for u, total in zip(fields, totals)
            if total > 0
        ]
        curve.append((tau, max(shares, default=0.0)))
    return curve


def collar_limit(fraction_curve: list) -> float:
    """
    Collar share extrapolated to tau -> 0.

    Linear in tau through the two thinnest collars. A share spread evenly
    over Omega grows like tau and extrapolates to O(h^2); a share that
    sits at the boundary keeps its value.
    """
    if len(fraction_curve) < 2:
        return fraction_curve[0][1]
    (t0, f0), (t1, f1) = fraction_curve[:2]
    return f0 - t0 * (f1 - f0) / (t1 - t0)


def classify(
    gap_curve: list, fraction_curve: list, sup_norm_p: float
) -> str:
    """
    Verdict from measured curves.

    Concentration: the collar share extrapolated to tau -> 0 (see
    collar_limit) is at least COLLAR_THRESHOLD. Oscillation: the smallest
    sup_n gap over delta is at least GAP_THRESHOLD of sup_n ||u_n||^p.
    """
    if sup_norm_p <= 0:
        return "no_obstruction"
    if collar_limit(fraction_curve) >= COLLAR_THRESHOLD:
        return "concentration_detected"
    if min(gap for _, gap in gap_curve) >= GAP_THRESHOLD * sup_norm_p:
        return "oscillation_detected"
    return "no_obstruction"


def build_sequence(
    spec: Union[dict, Sequence[VectorField]],
    grid: Grid,
    n_values: Sequence[int],
    p: float,
    seed: int = 0,
) -> tuple[str, list]:
    """Fields u_n for a sequence spec ({kind, ...}) or a ready list."""
    if isinstance(spec, dict):
        params = {k: v for k, v in spec.items() if k != "kind"}
        kind = spec["kind"]
        fields = [
            make_sequence(kind, grid, n, seed=seed, p=p, **params)
            for n in n_values
        ]
        return sequence_label(kind, **params), fields
    fields = list(spec)
    if len(fields) != len(n_values):
        raise ValueError("Need one field per n value")
    return fields[0].label or "fields", fields


def _gap_table(
    fields: Sequence[VectorField],
    deltas: Sequence[float],
    mm,
    p: float,
    n_jobs: Optional[int],
) -> np.ndarray:
    cells = [(i, j) for i in range(len(fields)) for j in range(len(deltas))]
    values = Parallel(n_jobs=n_jobs, prefer="threads")(
        delayed(smoothing_gap)(fields[i], deltas[j], mm, p) for i, j in cells
    )
    return np.asarray(values).reshape(len(fields), len(deltas))


def _kernel_hypotheses(kernel: Kernel, theta0: float = 0.5) -> dict:
    reach = min(1.0, kernel.support_radius)
    hypotheses = {}
    if kernel.is_radial:
        radii = np.geomspace(1e-3 * reach, 0.9 * reach, 12)
        hypotheses["radial_monotone"] = check_radial_monotone(
            kernel, radii
        ).verdict
        hypotheses["mass_ratio_limit"] = check_mass_ratio_limit(
            kernel
        ).verdict
    else:
        cone = kernel.cone if kernel.cone is not None else Cone.full(
            kernel.d
        )
        hypotheses["cone_condition"] = check_cone_condition(
            kernel, theta0, cone
        ).verdict
    for name, verdict in hypotheses.items():
        if verdict != "satisfied":
            logger.warning(
                "Kernel %s: %s is %s", kernel.name, name, verdict
            )
    return hypotheses


def _growth(seminorms: np.ndarray) -> float:
    positive = seminorms[seminorms > 0]
    if len(positive) == 0:
        return 1.0
    return float(positive.max() / positive.min())


def kernel_sequence_experiment(
    family: str,
    base: Kernel,
    sequence: Union[dict, Sequence[VectorField]],
    p: float,
    grid: Grid,
    n_values: Sequence[int] = DEFAULT_N_VALUES,
    deltas: Optional[Sequence[float]] = None,
    cone: Optional[Cone] = None,
    seed: int = 0,
    n_jobs: Optional[int] = None,
) -> CompactnessReport:
    """
    Run a field sequence against the kernel sequence rho_n of a family.

    Seminorms use rho_n; the predicted gap decay uses the mass ratio of
    the limit kernel (the base kernel, or the last rho_n for the rescaled
    family whose limit is a point mass).

    Args:
        family: One of kernels.FAMILIES
        base: Limit kernel rho
        sequence: Sequence spec {kind, ...} or one field per n
        p: Exponent
        grid: Grid
        n_values: Indices n
        deltas: Mollifier radii (default 2^-1..2^-12, filtered to >= 2 h)
        cone: Mollifier cone (default: full sphere)
        seed: Seed for random sequences
        n_jobs: joblib workers

    Returns:
        CompactnessReport; hypothesis_violated with no verdict when the
        seminorms grow by more than GROWTH_LIMIT
    """
    n_values = [int(n) for n in n_values]
    kept, dropped = experiment_deltas(grid, deltas)
    label, fields = build_sequence(sequence, grid, n_values, p, seed)
    kernels = [kernel_family(family, base, n) for n in n_values]
    hypotheses = _kernel_hypotheses(base)

    seminorms = np.array(
        [
            seminorm(u, k, p, n_jobs=n_jobs).value_p
            for u, k in zip(fields, kernels)
        ]
    )
    growth = _growth(seminorms)
    sup_norm = max(u.lp_norm_p(p) for u in fields)
    report = CompactnessReport(
        sequence_id=f"{label}|{family}",
        sup_seminorm=float(seminorms.max()),
        gap_curve=[],
        boundary_mass_curve=[],
        verdict=None,
        n_values=n_values,
        seminorms=seminorms.tolist(),
        sup_norm_p=sup_norm,
        hypotheses=hypotheses,
        growth_factor=growth,
        dropped_deltas=dropped,
    )
    if growth > GROWTH_LIMIT:
        logger.warning(
            "Seminorms grow by %.3g across n: hypothesis violated", growth
        )
        report.hypothesis_violated = True
        return report

    mm = cone_matrix(Cone.full(grid.d) if cone is None else cone)
    gaps = _gap_table(fields, kept, mm, p, n_jobs)
    limit = kernels[-1] if family == "rescaled" else base
    report.gap_curve = [
        (delta, float(gaps[:, j].max())) for j, delta in enumerate(kept)
    ]
    report.bound_curve = [
        (delta, mass_ratio(limit, delta) * report.sup_seminorm)
        for delta in kept
    ]
    report.boundary_mass_curve = boundary_mass_curve(fields, p)
    report.collar_fraction_curve = collar_fraction_curve(fields, p)
    report.verdict = classify(
        report.gap_curve, report.collar_fraction_curve, sup_norm
    )
    logger.info("Kernel sequence %s: %s", report.sequence_id, report.verdict)
    return report


def compactness_probe(
    sequence: Union[dict, Sequence[VectorField]],
    kernel: Kernel,
    p: float,
    grid: Grid,
    cone: Optional[Cone] = None,
    theta0: float = 0.5,
    deltas: Optional[Sequence[float]] = None,
    n_values: Sequence[int] = DEFAULT_N_VALUES,
    normalize_seminorm: bool = False,
    seed: int = 0,
    check_kernel: bool = True,
    n_theta: int = THETA_GRID,
    n_jobs: Optional[int] = None,
) -> CompactnessReport:
    """
    Measure smoothing gaps against the cone-condition bound
    gap <= C delta^p / int_0^delta rho_theta0(s v0) s^{d-1} ds |u_n|^p_S.

    The envelope constant is the smallest C satisfying the bound on every
    measured (n, delta) cell.

    Args:
        sequence: Sequence spec {kind, ...} or one field per n
        kernel: Kernel
        p: Exponent
        grid: Grid
        cone: Cone for the mollifier and the cone condition
            (default: the kernel's cone, else the full sphere)
        theta0: Cone-infimum parameter
        deltas: Mollifier radii (default 2^-1..2^-12, filtered to >= 2 h)
        n_values: Indices n
        normalize_seminorm: Rescale every u_n to unit seminorm
        seed: Seed for random sequences
        check_kernel: Run check_cone_condition and record the verdict
        n_theta: Size of the theta-grid of rho_theta0
        n_jobs: joblib workers

    Returns:
        CompactnessReport with envelope_constant and bound_curve
    """
    n_values = [int(n) for n in n_values]
    if cone is None:
        cone = kernel.cone if kernel.cone is not None else Cone.full(grid.d)
    kept, dropped = experiment_deltas(grid, deltas)
    label, fields = build_sequence(sequence, grid, n_values, p, seed)

    seminorms = np.array(
        [seminorm(u, kernel, p, n_jobs=n_jobs).value_p for u in fields]
    )
    if normalize_seminorm:
        fields = [
            u.scaled(s ** (-1.0 / p)) if s > 0 else u
            for u, s in zip(fields, seminorms)
        ]
        seminorms = np.where(seminorms > 0, 1.0, 0.0)

    hypotheses = {}
    if check_kernel:
        hypotheses["cone_condition"] = check_cone_condition(
            kernel, theta0, cone, n_theta=n_theta
        ).verdict
        if hypotheses["cone_condition"] != "satisfied":
            logger.warning(
                "Kernel %s: cone condition is %s",
                kernel.name,
                hypotheses["cone_condition"],
            )

    mm = cone_matrix(cone)
    gaps = _gap_table(fields, kept, mm, p, n_jobs)
    shape = np.array(
        [
            delta**p
            / cone_denominator(kernel, theta0, cone, delta, n_theta)
            for delta in kept
        ]
    )
    sup_semi = float(seminorms.max())
    sup_norm = max(u.lp_norm_p(p) for u in fields)
    # rigid members have no seminorm to bound their gap by
    null = seminorms <= NULL_SEMINORM_TOL * max(sup_norm, 1.0)
    null_n = [n for n, flag in zip(n_values, null) if flag]
    if null_n:
        logger.warning(
            "Seminorm vanishes for n=%s; left out of the envelope", null_n
        )
    scale = seminorms[~null, None] * shape[None, :]
    envelope = float((gaps[~null] / scale).max()) if scale.size else 0.0

    gap_curve = [
        (delta, float(gaps[:, j].max())) for j, delta in enumerate(kept)
    ]
    fraction_curve = collar_fraction_curve(fields, p)
    report = CompactnessReport(
        sequence_id=label,
        sup_seminorm=sup_semi,
        gap_curve=gap_curve,
        boundary_mass_curve=boundary_mass_curve(fields, p),
        verdict=classify(gap_curve, fraction_curve, sup_norm),
        n_values=n_values,
        seminorms=seminorms.tolist(),
        sup_norm_p=sup_norm,
        bound_curve=[
            (delta, envelope * shape[j] * sup_semi)
            for j, delta in enumerate(kept)
        ],
        envelope_constant=envelope,
        hypotheses=hypotheses,
        growth_factor=_growth(seminorms),
        dropped_deltas=dropped,
        collar_fraction_curve=fraction_curve,
        null_seminorm_n=null_n,
    )
    logger.info(
        "Compactness probe %s: envelope=%.4g verdict=%s",
        label,
        envelope,
        report.verdict,
    )
    return report
