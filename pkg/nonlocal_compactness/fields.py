"""
Vector fields on grids, rigid motions and field sequences.

A VectorField holds d components at every grid node and is extended by
zero outside Omega. Rigid motions x -> A x + b (A skew) span the null
space R of the seminorm; SubspaceSpec describes a subspace V of fields
through linear constraints with V ∩ R = {0}, by default zero mean and zero
skew moments (the weighted L^2 complement of R).
"""

import hashlib
import logging
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
import pandas as pd
from scipy import linalg

from .errors import RankError
from .geometry import Grid

logger = logging.getLogger(__name__)

SEQUENCE_KINDS = (
    "oscillatory", "concentrating", "translating", "random", "fixed"
)
CONSTRAINT_KINDS = ("mean", "skew_moment")


def smooth_bump(t: np.ndarray) -> np.ndarray:
    """Bump exp(1 - 1/(1 - t^2)) on |t| < 1 with peak value 1."""
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    inside = np.abs(t) < 1
    out[inside] = np.exp(1.0 - 1.0 / (1.0 - t[inside] ** 2))
    return out


@dataclass(eq=False)
class AnalyticField:
    """
    Named analytic field x -> u(x).

    Attributes:
        name: Key of ANALYTIC_FIELDS
        params: Parameters of the expression
        func: Vectorized map from points (m, d) to values (m, d)
    """

    name: str
    params: dict
    func: Callable[[np.ndarray], np.ndarray] = field(repr=False)

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return self.func(np.atleast_2d(np.asarray(x, dtype=float)))

    def to_dict(self) -> dict:
        return {"name": self.name, **_jsonable(self.params)}


def _jsonable(params: dict) -> dict:
    out = {}
    for key, value in params.items():
        if isinstance(value, np.ndarray):
            value = value.tolist()
        out[key] = value
    return out


def _unit(d: int, axis: int = 0) -> np.ndarray:
    e = np.zeros(d)
    e[axis] = 1.0
    return e


def _identity(d: int) -> AnalyticField:
    return AnalyticField("identity", {}, lambda x: x.copy())


def _constant(d: int, value: Sequence[float] = None) -> AnalyticField:
    value = _unit(d) if value is None else np.asarray(value, dtype=float)
    return AnalyticField(
        "constant",
        {"value": value},
        lambda x: np.broadcast_to(value, x.shape).copy(),
    )


def _rotation(d: int) -> AnalyticField:
    if d < 2:
        raise ValueError("Rotations need d >= 2")
    A = np.zeros((d, d))
    A[0, 1], A[1, 0] = -1.0, 1.0
    return _rigid(d, A, np.zeros(d))


def _rigid(d: int, A=None, b=None) -> AnalyticField:
    motion = RigidMotion(
        A=np.zeros((d, d)) if A is None else A,
        b=np.zeros(d) if b is None else b,
    )
    A_arr, b_arr = motion.matrix, motion.vector
    return AnalyticField(
        "rigid",
        {"A": A_arr, "b": b_arr},
        lambda x: x @ A_arr.T + b_arr,
    )


def _fourier(
    d: int,
    k: Sequence[float] = None,
    component: int = 0,
    amplitude: float = 1.0,
) -> AnalyticField:
    k = _unit(d) if k is None else np.asarray(k, dtype=float)
    e = _unit(d, component)

    def func(x):
        return amplitude * np.sin(2 * np.pi * x @ k)[:, None] * e

    return AnalyticField(
        "fourier",
        {"k": k, "component": component, "amplitude": amplitude},
        func,
    )


def _bump(
    d: int,
    center: Sequence[float] = None,
    radius: float = 0.25,
    direction: Sequence[float] = None,
    amplitude: float = 1.0,
) -> AnalyticField:
    center = np.full(d, 0.5) if center is None else np.asarray(center, float)
    direction = (
        _unit(d) if direction is None else np.asarray(direction, float)
    )

    def func(x):
        t = np.linalg.norm(x - center, axis=1) / radius
        return amplitude * smooth_bump(t)[:, None] * direction

    return AnalyticField(
        "bump",
        {
            "center": center,
            "radius": radius,
            "direction": direction,
            "amplitude": amplitude,
        },
        func,
    )


ANALYTIC_FIELDS = {
    "identity": _identity,
    "constant": _constant,
    "rotation": _rotation,
    "rigid": _rigid,
    "fourier": _fourier,
    "bump": _bump,
}


def make_field(spec: dict, d: int) -> AnalyticField:
    """
    Build an analytic field from a config mapping {name, ...params}.

    Args:
        spec: Field specification
        d: Dimension

    Returns:
        AnalyticField
    """
    params = dict(spec)
    name = params.pop("name", None)
    if name not in ANALYTIC_FIELDS:
        raise ValueError(
            f"Unknown field '{name}'. "
            f"Must be one of: {list(ANALYTIC_FIELDS.keys())}"
        )
    return ANALYTIC_FIELDS[name](d, **params)


@dataclass(frozen=True, eq=False)
class VectorField:
    """
    Field u sampled at grid nodes, zero outside Omega.

    Attributes:
        grid: Grid carrying the nodes
        values: Read-only array of shape (N, d)
        expr: Analytic expression the values were sampled from, if any
        label: Optional description
    """

    grid: Grid
    values: np.ndarray
    expr: Optional[AnalyticField] = None
    label: Optional[str] = None

    def __post_init__(self):
        values = np.array(self.values, dtype=float).reshape(
            self.grid.n_nodes, -1
        )
        if values.shape[1] != self.grid.d:
            raise ValueError(
                f"Field has {values.shape[1]} components, expected "
                f"{self.grid.d}"
            )
        if not np.all(np.isfinite(values)):
            raise ValueError("Field values must be finite")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def d(self) -> int:
        return self.grid.d

    def lp_norm_p(self, p: float, mask: Optional[np.ndarray] = None) -> float:
        """int |u|^p over Omega (or over the masked nodes)."""
        magnitude = np.linalg.norm(self.values, axis=1) ** p
        weights = self.grid.weights
        if mask is not None:
            magnitude, weights = magnitude[mask], weights[mask]
        return float(magnitude @ weights)

    def scaled(self, factor: float) -> "VectorField":
        """Field c u; the analytic expression is scaled along."""
        expr = None
        if self.expr is not None:
            inner = self.expr
            expr = AnalyticField(
                inner.name,
                {**inner.params, "scale": factor},
                lambda x: factor * inner(x),
            )
        return VectorField(self.grid, factor * self.values, expr, self.label)

    def lattice(self, pad: int = 0) -> np.ndarray:
        """Zero-extended values on the bounding-box lattice."""
        return self.grid.to_lattice(self.values, pad=pad)


def field_hash(u: VectorField) -> str:
    """SHA-256 of the field's float64 values."""
    data = np.ascontiguousarray(u.values, dtype=np.float64)
    return hashlib.sha256(data.tobytes()).hexdigest()


def sample_field(expr: AnalyticField, grid: Grid) -> VectorField:
    """
    Evaluate an analytic field at the grid nodes.

    Args:
        expr: AnalyticField
        grid: Grid

    Returns:
        VectorField carrying the expression

    Raises:
        ValueError: If the expression is undefined (non-finite) at a node
    """
    with np.errstate(all="ignore"):
        values = np.asarray(expr(grid.nodes), dtype=float)
    values = values.reshape(grid.n_nodes, grid.d)
    bad = ~np.all(np.isfinite(values), axis=1)
    if bad.any():
        node = grid.nodes[np.argmax(bad)]
        raise ValueError(
            f"Field '{expr.name}' is undefined at node {node.tolist()}"
        )
    return VectorField(grid, values, expr=expr, label=expr.name)


def write_field_csv(u: VectorField, path: str) -> None:
    """Write a field as CSV with columns x_1..x_d, u_1..u_d."""
    d = u.d
    columns = [f"x_{i + 1}" for i in range(d)] + [
        f"u_{i + 1}" for i in range(d)
    ]
    df = pd.DataFrame(np.hstack([u.grid.nodes, u.values]), columns=columns)
    df.to_csv(path, index=False, float_format="%.17g", lineterminator="\n")


def read_field_csv(path: str, grid: Grid) -> VectorField:
    """
    Read a field CSV whose rows are the grid nodes in lexicographic order.

    Raises:
        ValueError: If columns or node coordinates do not match the grid
    """
    d = grid.d
    df = pd.read_csv(path)
    x_cols = [f"x_{i + 1}" for i in range(d)]
    u_cols = [f"u_{i + 1}" for i in range(d)]
    missing = [c for c in x_cols + u_cols if c not in df.columns]
    if missing:
        raise ValueError(f"Field file {path} is missing columns {missing}")
    if len(df) != grid.n_nodes:
        raise ValueError(
            f"Field file {path} has {len(df)} rows, grid has "
            f"{grid.n_nodes} nodes"
        )
    coords = df[x_cols].to_numpy(float)
    if not np.allclose(coords, grid.nodes, rtol=0, atol=1e-9 * grid.h.max()):
        raise ValueError(f"Field file {path} nodes do not match the grid")
    return VectorField(grid, df[u_cols].to_numpy(float), label=str(path))


def apply_cutoff(u: VectorField, tau: float) -> VectorField:
    """
    Multiply u by a smooth cutoff vanishing on the collar dist <= tau.

    The cutoff rises from 0 at dist = tau to 1 at dist = 2 tau.
    """
    if tau <= 0:
        raise ValueError(f"tau must be positive, got {tau}")
    t = np.clip(u.grid.boundary_distance / tau - 1.0, 0.0, 1.0)
    window = np.where(t >= 1, 1.0, smooth_bump(1.0 - t))
    return VectorField(u.grid, u.values * window[:, None], label=u.label)


# ---------------------------------------------------------------------------
# Rigid motions and subspaces
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class RigidMotion:
    """
    Affine map x -> A x + b with skew-symmetric A.

    Attributes:
        A: d x d matrix with A + A^T = 0 exactly
        b: Translation vector
    """

    A: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        A = np.array(self.A, dtype=float)
        b = np.atleast_1d(np.array(self.b, dtype=float))
        if A.ndim != 2 or A.shape[0] != A.shape[1] or A.shape[0] != b.size:
            raise ValueError("A must be d x d and b must have d entries")
        if np.any(A + A.T != 0):
            raise ValueError("A must be skew-symmetric (A + A^T = 0)")
        A.setflags(write=False)
        b.setflags(write=False)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)

    @property
    def matrix(self) -> np.ndarray:
        return self.A

    @property
    def vector(self) -> np.ndarray:
        return self.b

    @classmethod
    def random(cls, d: int, rng: np.random.Generator) -> "RigidMotion":
        """Random rigid motion with standard normal entries."""
        upper = np.triu(rng.standard_normal((d, d)), k=1)
        return cls(A=upper - upper.T, b=rng.standard_normal(d))


def rigid_motion_field(motion: RigidMotion, grid: Grid) -> VectorField:
    """
    Sample u(x) = A x + b at the grid nodes.

    Examples:
        >>> rm = RigidMotion(A=[[0, -1], [1, 0]], b=[0, 0])
        >>> u = rigid_motion_field(rm, grid)  # u(x) = (-x2, x1)
    """
    if motion.A.shape[0] != grid.d:
        raise ValueError("Rigid motion and grid dimensions differ")
    return sample_field(_rigid(grid.d, motion.A, motion.b), grid)


def rigid_basis(grid: Grid) -> np.ndarray:
    """
    Generators of R sampled on the grid, flattened node-major.

    Columns are the translations e_c followed by the infinitesimal
    rotations x_j e_i - x_i e_j for i < j.

    Returns:
        Array of shape (N d, d (d + 1) / 2)
    """
    d, n = grid.d, grid.n_nodes
    columns = []
    for c in range(d):
        values = np.zeros((n, d))
        values[:, c] = 1.0
        columns.append(values.ravel())
    for i in range(d):
        for j in range(i + 1, d):
            values = np.zeros((n, d))
            values[:, i] = grid.nodes[:, j]
            values[:, j] = -grid.nodes[:, i]
            columns.append(values.ravel())
    return np.stack(columns, axis=1)


@dataclass(frozen=True)
class SubspaceSpec:
    """
    Subspace V of fields defined by linear constraints.

    Attributes:
        constraints: Names from CONSTRAINT_KINDS. "mean" imposes
            int u_c = 0 for every component; "skew_moment" imposes
            int (u_i x_j - u_j x_i) = 0 for i < j.
    """

    constraints: tuple = CONSTRAINT_KINDS

    def __post_init__(self):
        unknown = [c for c in self.constraints if c not in CONSTRAINT_KINDS]
        if unknown:
            raise ValueError(
                f"Unknown constraints {unknown}. "
                f"Must be among: {list(CONSTRAINT_KINDS)}"
            )

    @property
    def is_default(self) -> bool:
        return tuple(self.constraints) == CONSTRAINT_KINDS

    def to_dict(self) -> dict:
        return {"constraints": list(self.constraints)}


def constraint_matrix(spec: SubspaceSpec, grid: Grid) -> np.ndarray:
    """
    Matrix C with V = {u: C u = 0} on node-major flattened fields.

    Returns:
        Array of shape (m, N d)
    """
    d, n = grid.d, grid.n_nodes
    weights = grid.weights
    rows = []
    if "mean" in spec.constraints:
        for c in range(d):
            row = np.zeros((n, d))
            row[:, c] = weights
            rows.append(row.ravel())
    if "skew_moment" in spec.constraints:
        for i in range(d):
            for j in range(i + 1, d):
                row = np.zeros((n, d))
                row[:, i] = weights * grid.nodes[:, j]
                row[:, j] = -weights * grid.nodes[:, i]
                rows.append(row.ravel())
    if not rows:
        return np.zeros((0, n * d))
    return np.stack(rows)


def check_transversal(spec: SubspaceSpec, grid: Grid) -> np.ndarray:
    """
    Gram matrix C B of the constraints against the rigid generators.

    Raises:
        RankError: If C B is singular, i.e. V ∩ R != {0} on the grid
    """
    C = constraint_matrix(spec, grid)
    B = rigid_basis(grid)
    gram = C @ B
    if gram.shape[0] != gram.shape[1]:
        raise RankError(
            f"Constraints give {gram.shape[0]} conditions, R has dimension "
            f"{gram.shape[1]}"
        )
    rank = np.linalg.matrix_rank(gram)
    if rank < gram.shape[1]:
        raise RankError(
            f"Constraint Gram matrix has rank {rank} < {gram.shape[1]}: "
            "V intersects the rigid motions"
        )
    return gram


def project_out_rigid(
    u: VectorField, spec: Optional[SubspaceSpec] = None
) -> VectorField:
    """
    Remove the rigid part of u so that the result lies in V.

    Returns w = u - B c with c solving (C B) c = C u. For the default spec
    this is the weighted L^2 projection onto the complement of R.

    Args:
        u: Field
        spec: Subspace (default: zero mean and zero skew moments)

    Returns:
        VectorField in V

    Raises:
        RankError: If the Gram matrix C B is singular
    """
    spec = SubspaceSpec() if spec is None else spec
    grid = u.grid
    gram = check_transversal(spec, grid)
    C = constraint_matrix(spec, grid)
    B = rigid_basis(grid)
    flat = u.values.ravel()
    coefficients = linalg.solve(gram, C @ flat)
    residual = flat - B @ coefficients
    return VectorField(
        grid, residual.reshape(grid.n_nodes, grid.d), label=u.label
    )


# ---------------------------------------------------------------------------
# Sequences
# ---------------------------------------------------------------------------


def _normalized(values: np.ndarray, grid: Grid, p: float) -> np.ndarray:
    norm_p = float(np.linalg.norm(values, axis=1) ** p @ grid.weights)
    if norm_p == 0:
        logger.warning("Sequence member vanishes on the grid; kept at zero")
        return values
    return values / norm_p ** (1.0 / p)


def _box_center(grid: Grid) -> np.ndarray:
    return grid.lo + np.asarray(grid.shape) * grid.h / 2


def make_sequence(
    kind: str,
    grid: Grid,
    n: int,
    seed: int = 0,
    p: float = 2.0,
    **params,
) -> VectorField:
    """
    Member n of a deterministic field sequence.

    Kinds:
    - oscillatory: sin(2 pi k0 n x_axis) e_component, unit L^p norm
    - concentrating: bump in dist(x, boundary) of width scale / n
      (mass in a shrinking boundary collar), unit L^p norm
    - translating: bump of radius ``radius`` centred at
      center + shift (n - 1) direction; unit L^p norm if ``normalize``
    - random: Fourier sine series with Gaussian coefficients decaying as
      (1 + |k|^2)^(-smoothness/2), seeded by (seed, n); unit L^p norm
    - fixed: the analytic field ``field`` (a make_field spec) for every n

    Args:
        kind: One of SEQUENCE_KINDS
        grid: Grid
        n: Index (>= 1)
        seed: Random seed (random kind)
        p: Exponent used for normalization
        **params: Kind-specific parameters

    Returns:
        VectorField
    """
    if kind not in SEQUENCE_KINDS:
        raise ValueError(
            f"Unknown sequence kind '{kind}'. "
            f"Must be one of: {list(SEQUENCE_KINDS)}"
        )
    if n < 1:
        raise ValueError(f"n must be at least 1, got {n}")
    d = grid.d
    x = grid.nodes

    if kind == "oscillatory":
        k0 = params.get("k0", 1.0)
        axis = params.get("axis", 0)
        component = params.get("component", 0)
        values = np.zeros((grid.n_nodes, d))
        values[:, component] = np.sin(2 * np.pi * k0 * n * x[:, axis])
        values = _normalized(values, grid, p)

    elif kind == "concentrating":
        width = params.get("scale", 0.25) / n
        component = params.get("component", 0)
        profile = smooth_bump(grid.boundary_distance / width)
        if not profile.any():
            raise ValueError(
                f"Collar width {width:g} is below the grid resolution"
            )
        values = np.zeros((grid.n_nodes, d))
        values[:, component] = profile
        values = _normalized(values, grid, p)

    elif kind == "translating":
        center = np.asarray(params.get("center", _box_center(grid)), float)
        direction = np.asarray(params.get("direction", _unit(d)), float)
        direction = direction / np.linalg.norm(direction)
        radius = params.get("radius", 0.15)
        shift = params.get("shift", 0.1)
        moved = center + shift * (n - 1) * direction
        t = np.linalg.norm(x - moved, axis=1) / radius
        values = smooth_bump(t)[:, None] * _unit(d)
        if params.get("normalize", False):
            values = _normalized(values, grid, p)

    elif kind == "fixed":
        if "field" not in params:
            raise ValueError("Fixed sequences need a 'field' spec")
        values = sample_field(make_field(params["field"], d), grid).values

    else:
        smoothness = params.get("smoothness", 2.0)
        modes = params.get("modes", 6)
        rng = np.random.default_rng([seed, n])
        ks = np.stack(
            np.meshgrid(*([np.arange(1, modes + 1)] * d), indexing="ij"),
            axis=-1,
        ).reshape(-1, d)
        decay = (1 + np.sum(ks**2, axis=1)) ** (-smoothness / 2)
        coefficients = rng.standard_normal((len(ks), d)) * decay[:, None]
        lo = grid.lo
        extent = np.asarray(grid.shape) * grid.h
        phase = np.pi * (x - lo) / extent
        basis = np.prod(np.sin(ks[None, :, :] * phase[:, None, :]), axis=2)
        values = basis @ coefficients
        if params.get("interior", 0.0) > 0:
            tau = params["interior"]
            values = apply_cutoff(VectorField(grid, values), tau).values
        values = _normalized(values, grid, p)

    return VectorField(grid, values, label=f"{kind}[n={n}]")


def sequence_label(kind: str, **params) -> str:
    """Stable identifier of a sequence specification."""
    items = ",".join(f"{k}={params[k]}" for k in sorted(params))
    return f"{kind}({items})" if items else kind

