"""
Interaction kernels and their admissibility checks.

A kernel rho is a nonnegative, locally integrable weight on offsets
xi in R^d. The catalog covers the kernels used to study compactness of
S_{rho,p}:

    fractional(s)    |xi|^-(d + p(s-1))
    log              -|xi|^(p-d) ln|xi|        for |xi| < 1
    borderline       |xi|^(p-d)                for |xi| < 1
    indicator        1                         for |xi| < R
    power(a)         |xi|^a                    for |xi| < R
    cone_restricted  base(xi) chi_{B_1^Lambda}(xi)
    custom_radial    tabulated radial profile (log-log interpolation)
    truncated        base(xi) chi_{|xi| > eps}
    rescaled         n^d base(n xi) / ||base||_{L^1}

Three sufficient conditions are checked numerically:

- radial_monotone: rho is radial and |xi|^-p rho(xi) is nonincreasing
- mass_ratio_limit: delta^p / int_{B_delta} rho -> 0
- cone_condition: rho_theta0 is direction-independent on a cone Lambda and
  delta^p / int_0^delta rho_theta0(r v0) r^{d-1} dr -> 0
"""

import hashlib
import json
import logging
import math
import warnings
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np
import pandas as pd
from scipy.integrate import IntegrationWarning, quad

from .errors import CapabilityError, DegenerateKernelError
from .errors import KernelSingularityError
from .geometry import (
    Cone,
    _check_dimension,
    cap_area,
    cone_membership,
    sphere_area,
    sphere_quadrature,
)

logger = logging.getLogger(__name__)

SUPPORTED_KINDS = {
    "fractional": "|xi|^-(d + p(s-1))",
    "log": "-|xi|^(p-d) ln|xi| on |xi| < 1",
    "borderline": "|xi|^(p-d) on |xi| < 1",
    "indicator": "1 on |xi| < R",
    "power": "|xi|^a on |xi| < R",
    "cone_restricted": "base(xi) on the unit cone sector",
    "custom_radial": "tabulated radial profile",
    "truncated": "base(xi) on |xi| > eps",
    "rescaled": "n^d base(n xi) / mass(base)",
}

# Verdict tolerances for the limit checks
SLOPE_TOL = 0.05
RATIO_TOL = 1e-3
REL_TOL = 1e-6

# Points of the geometric theta-grid used for the cone infimum
THETA_GRID = 64

# Default geometric delta sequence for the limit checks: 2^-1 .. 2^-40
DEFAULT_DELTAS = tuple(2.0 ** -np.arange(1, 41))

_QUAD_OPTIONS = {"epsabs": 0.0, "epsrel": 1e-10, "limit": 200}


@dataclass(frozen=True)
class Kernel:
    """
    Interaction kernel rho with metadata.

    Build kernels with the constructor functions of this module
    (:func:`fractional_kernel`, :func:`cone_restricted_kernel`, ...).

    Attributes:
        d: Spatial dimension
        p: Seminorm exponent (>= 1)
        kind: One of SUPPORTED_KINDS
        s: Fractional order (fractional kind)
        support_radius: rho vanishes for |xi| >= support_radius
        exponent: Power a (power kind)
        base: Wrapped kernel (cone_restricted, truncated, rescaled)
        cone: Direction set (cone_restricted)
        table_radii: Tabulated radii (custom_radial)
        table_values: Tabulated profile values (custom_radial)
        inner_radius: Truncation radius (truncated)
        scale: Rescaling factor n (rescaled)
        weight: Normalizing factor 1/mass(base) (rescaled)
        label: Human-readable name
    """

    d: int
    p: float
    kind: str
    s: Optional[float] = None
    support_radius: float = math.inf
    exponent: Optional[float] = None
    base: Optional["Kernel"] = None
    cone: Optional[Cone] = None
    table_radii: tuple = ()
    table_values: tuple = ()
    inner_radius: float = 0.0
    scale: float = 1.0
    weight: float = 1.0
    label: Optional[str] = field(default=None, compare=False)

    def __post_init__(self):
        _check_dimension(self.d)
        if not self.p >= 1 or not math.isfinite(self.p):
            raise ValueError(f"p >= 1 required, got p={self.p}")
        if self.kind not in SUPPORTED_KINDS:
            raise ValueError(
                f"Unknown kernel kind '{self.kind}'. "
                f"Must be one of: {list(SUPPORTED_KINDS.keys())}"
            )
        if not self.support_radius > 0:
            raise ValueError(
                f"support_radius must be positive, got {self.support_radius}"
            )
        if self.base is not None and (
            self.base.d != self.d or self.base.p != self.p
        ):
            raise ValueError("Wrapped kernel must share d and p")

    @property
    def radial_exponent(self) -> Optional[float]:
        """Power-law exponent of the profile near the origin, if any."""
        if self.kind == "fractional":
            return -(self.d + self.p * (self.s - 1))
        if self.kind in ("borderline", "log"):
            return self.p - self.d
        if self.kind == "power":
            return self.exponent
        if self.kind == "indicator":
            return 0.0
        if self.kind == "custom_radial":
            r = np.log(self.table_radii[:2])
            v = np.log(self.table_values[:2])
            return float((v[1] - v[0]) / (r[1] - r[0]))
        return None

    @property
    def is_singular(self) -> bool:
        """Whether rho is unbounded at the origin."""
        if self.kind in ("cone_restricted", "rescaled"):
            return self.base.is_singular
        if self.kind == "truncated":
            return False
        if self.kind == "log":
            return self.p <= self.d
        return self.radial_exponent < 0

    @property
    def is_radial(self) -> bool:
        if self.kind == "cone_restricted":
            return self.cone.full_sphere and self.base.is_radial
        if self.base is not None:
            return self.base.is_radial
        return True

    @property
    def name(self) -> str:
        if self.label:
            return self.label
        if self.kind == "fractional":
            return f"fractional(s={self.s})"
        if self.kind == "power":
            return f"power(a={self.exponent})"
        if self.base is not None:
            return f"{self.kind}({self.base.name})"
        return self.kind

    def to_dict(self) -> dict:
        """Canonical JSON-ready description (used for hashing)."""
        out = {"kind": self.kind, "d": self.d, "p": self.p}
        if self.s is not None:
            out["s"] = self.s
        if math.isfinite(self.support_radius):
            out["support_radius"] = self.support_radius
        if self.exponent is not None:
            out["exponent"] = self.exponent
        if self.base is not None:
            out["base"] = self.base.to_dict()
        if self.cone is not None:
            out["cone"] = self.cone.to_dict()
        if self.table_radii:
            out["table_radii"] = list(self.table_radii)
            out["table_values"] = list(self.table_values)
        if self.kind == "truncated":
            out["inner_radius"] = self.inner_radius
        if self.kind == "rescaled":
            out["scale"] = self.scale
            out["weight"] = self.weight
        return out


def kernel_hash(kernel: Kernel) -> str:
    """SHA-256 of the kernel's canonical JSON description."""
    text = json.dumps(kernel.to_dict(), sort_keys=True)
    return hashlib.sha256(text.encode()).hexdigest()


# ---------------------------------------------------------------------------
# Constructors
# ---------------------------------------------------------------------------


def fractional_kernel(
    d: int, p: float, s: float, support_radius: float = math.inf
) -> Kernel:
    """
    Fractional kernel |xi|^-(d + p(s-1)).

    Args:
        d: Dimension
        p: Exponent
        s: Order in (0, 1)
        support_radius: Optional cutoff radius

    Returns:
        Kernel
    """
    if not 0 < s < 1:
        raise ValueError(f"Fractional order s must lie in (0, 1), got {s}")
    return Kernel(
        d=d, p=p, kind="fractional", s=s, support_radius=support_radius
    )


def log_kernel(d: int, p: float) -> Kernel:
    """Logarithmic kernel -|xi|^(p-d) ln|xi| on the unit ball."""
    return Kernel(d=d, p=p, kind="log", support_radius=1.0)


def borderline_kernel(d: int, p: float) -> Kernel:
    """Borderline kernel |xi|^(p-d) on the unit ball."""
    return Kernel(d=d, p=p, kind="borderline", support_radius=1.0)


def indicator_kernel(d: int, p: float, radius: float = 1.0) -> Kernel:
    """Indicator of the ball B_radius."""
    return Kernel(d=d, p=p, kind="indicator", support_radius=radius)


def power_kernel(
    d: int, p: float, exponent: float, radius: float = 1.0
) -> Kernel:
    """
    Power kernel |xi|^a on B_radius.

    With a = p the quotient |xi|^-p rho is integrable and S_{rho,p} = L^p.
    """
    if exponent <= -d:
        raise ValueError(
            f"Power kernel exponent {exponent} is not locally integrable "
            f"in dimension {d}"
        )
    return Kernel(
        d=d, p=p, kind="power", exponent=exponent, support_radius=radius
    )


def cone_restricted_kernel(base: Kernel, cone: Cone) -> Kernel:
    """Restrict a kernel to the unit ball sector B_1^Lambda."""
    if cone.d != base.d:
        raise ValueError(
            f"Cone dimension {cone.d} does not match kernel dimension "
            f"{base.d}"
        )
    return Kernel(
        d=base.d,
        p=base.p,
        kind="cone_restricted",
        base=base,
        cone=cone,
        support_radius=min(1.0, base.support_radius),
    )


def custom_radial_kernel(
    d: int,
    p: float,
    radii: Sequence[float],
    values: Sequence[float],
    label: Optional[str] = None,
) -> Kernel:
    """
    Radial kernel tabulated at increasing radii.

    The profile is interpolated linearly in log-log space, extrapolated
    below the first radius with the first segment's power law, and vanishes
    beyond the last radius.
    """
    radii = np.asarray(radii, dtype=float)
    values = np.asarray(values, dtype=float)
    if radii.ndim != 1 or radii.shape != values.shape or len(radii) < 2:
        raise ValueError("Radial table needs at least two (radius, value)")
    if np.any(radii <= 0) or np.any(np.diff(radii) <= 0):
        raise ValueError("Table radii must be positive and increasing")
    if np.any(values <= 0) or not np.all(np.isfinite(values)):
        raise ValueError("Table values must be positive and finite")
    return Kernel(
        d=d,
        p=p,
        kind="custom_radial",
        table_radii=tuple(radii.tolist()),
        table_values=tuple(values.tolist()),
        support_radius=float(radii[-1]),
        label=label,
    )


def load_radial_table(path: str) -> tuple[np.ndarray, np.ndarray]:
    """
    Read a two-column (radius, value) CSV table.

    Args:
        path: CSV path with a header row

    Returns:
        Tuple (radii, values)
    """
    df = pd.read_csv(path)
    if df.shape[1] != 2:
        raise ValueError(
            f"Radial table {path} must have two columns, got {df.shape[1]}"
        )
    return df.iloc[:, 0].to_numpy(float), df.iloc[:, 1].to_numpy(float)


def truncated_kernel(base: Kernel, n: int) -> Kernel:
    """rho_n = rho chi_{|xi| > 1/n} (no renormalization)."""
    if n < 1:
        raise ValueError(f"n must be at least 1, got {n}")
    return Kernel(
        d=base.d,
        p=base.p,
        kind="truncated",
        base=base,
        inner_radius=1.0 / n,
        support_radius=base.support_radius,
    )


def rescaled_kernel(base: Kernel, n: int) -> Kernel:
    """
    Dirac-like rho_n(xi) = n^d base(n xi) / ||base||_{L^1}.

    The base must have bounded support; every rho_n has unit mass.
    """
    if n < 1:
        raise ValueError(f"n must be at least 1, got {n}")
    if not math.isfinite(base.support_radius):
        raise CapabilityError("Rescaled families need a compact base kernel")
    mass = ball_integral(base, base.support_radius)
    if not mass > 0:
        raise DegenerateKernelError("Base kernel has zero mass")
    return Kernel(
        d=base.d,
        p=base.p,
        kind="rescaled",
        base=base,
        scale=float(n),
        weight=1.0 / mass,
        support_radius=base.support_radius / n,
    )


def _bump(t: np.ndarray) -> np.ndarray:
    """exp(-1/(1 - t^2)) on |t| < 1, zero outside."""
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    inside = np.abs(t) < 1
    out[inside] = np.exp(-1.0 / (1.0 - t[inside] ** 2))
    return out


def mollified_kernel(
    base: Kernel,
    n: int,
    n_table: int = 96,
    max_radius: Optional[float] = None,
) -> Kernel:
    """
    rho_n = rho * eta_{1/n}, tabulated as a custom radial kernel.

    eta is the standard bump normalized to unit mass. The convolution is
    evaluated in polar coordinates centred at the origin of rho, so the
    singularity of rho is carried by the r^{d-1} weight.

    Args:
        base: Radial kernel rho
        n: Family index; the bump has width 1/n
        n_table: Number of log-spaced table radii
        max_radius: Largest tabulated radius (default support + 1/n, or 4
            for unbounded kernels)

    Returns:
        custom_radial Kernel
    """
    if n < 1:
        raise ValueError(f"n must be at least 1, got {n}")
    if not base.is_radial:
        raise CapabilityError("Mollified families need a radial base kernel")
    d = base.d
    eps = 1.0 / n
    if max_radius is None:
        if math.isfinite(base.support_radius):
            max_radius = (base.support_radius + eps) * (1 - 1e-6)
        else:
            max_radius = 4.0

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", IntegrationWarning)
        bump_mass = sphere_area(d) * quad(
            lambda t: _bump(t) * t ** (d - 1), 0, 1
        )[0]

    if d == 1:
        directions, dir_weights = np.array([[1.0], [-1.0]]), np.ones(2)
    else:
        directions, dir_weights = sphere_quadrature(
            Cone.full(d), 256 if d == 2 else 2000
        )

    def angular(x: float, radius: float) -> float:
        # integral over |w| = 1 of eta_eps(x e1 - radius w)
        offsets = np.zeros(d)
        offsets[0] = x
        diff = offsets[None, :] - radius * directions
        t = np.linalg.norm(diff, axis=1) / eps
        return float(_bump(t) @ dir_weights) / (bump_mass * eps**d)

    radii = np.geomspace(1e-3 * eps, max_radius, n_table)
    values = np.empty(n_table)
    for i, x in enumerate(radii):
        lower, upper = max(0.0, x - eps), x + eps
        if math.isfinite(base.support_radius):
            upper = min(upper, base.support_radius)
        if upper <= lower:
            values[i] = 0.0
            continue
        values[i] = _radial_quad(
            lambda s: radial_profile(base, s) * s ** (d - 1)
            * angular(x, s),
            lower,
            upper,
            epsrel=1e-6,
        )
    keep = values > 0
    if keep.sum() < 2:
        raise DegenerateKernelError("Mollified kernel vanishes on its table")
    return custom_radial_kernel(
        d,
        base.p,
        radii[keep],
        values[keep],
        label=f"mollified({base.name}, n={n})",
    )


FAMILIES = {
    "mollified": mollified_kernel,
    "truncated": truncated_kernel,
    "rescaled": rescaled_kernel,
}


def kernel_family(family: str, base: Kernel, n: int) -> Kernel:
    """
    Member n of a kernel sequence converging weakly in L^1_loc.

    Args:
        family: One of FAMILIES ("mollified", "truncated", "rescaled")
        base: Target kernel rho (or profile for "rescaled")
        n: Index (>= 1)

    Returns:
        Kernel rho_n
    """
    if family not in FAMILIES:
        raise ValueError(
            f"Unknown kernel family '{family}'. "
            f"Must be one of: {list(FAMILIES.keys())}"
        )
    return FAMILIES[family](base, n)


def make_kernel(spec: dict, table_loader=load_radial_table) -> Kernel:
    """
    Build a kernel from a config mapping.

    Recognized keys: kind, d, p, s, exponent, support_radius, base_kind,
    cone ({axis, aperture}), table (CSV path for custom_radial).

    Args:
        spec: Kernel specification
        table_loader: Callable reading a radial table path

    Returns:
        Kernel
    """
    kind = spec.get("kind")
    d = int(spec["d"])
    p = float(spec["p"])
    support = spec.get("support_radius")

    if kind == "fractional":
        return fractional_kernel(
            d,
            p,
            float(spec["s"]),
            support_radius=math.inf if support is None else float(support),
        )
    if kind == "log":
        return log_kernel(d, p)
    if kind == "borderline":
        return borderline_kernel(d, p)
    if kind == "indicator":
        return indicator_kernel(d, p, 1.0 if support is None else support)
    if kind == "power":
        return power_kernel(
            d, p, float(spec["exponent"]), 1.0 if support is None else support
        )
    if kind == "custom_radial":
        radii, values = table_loader(spec["table"])
        return custom_radial_kernel(d, p, radii, values)
    if kind == "cone_restricted":
        base_spec = {k: v for k, v in spec.items() if k not in ("cone",)}
        base_spec["kind"] = spec.get("base_kind", "fractional")
        base = make_kernel(base_spec, table_loader)
        cone_spec = spec.get("cone")
        if cone_spec is None:
            raise ValueError("cone_restricted kernels need a cone")
        return cone_restricted_kernel(base, make_cone(cone_spec, d))
    raise ValueError(
        f"Unknown kernel kind '{kind}'. "
        f"Must be one of: {list(SUPPORTED_KINDS.keys())}"
    )


def make_cone(spec: Union[dict, str, None], d: int) -> Cone:
    """Build a cone from {axis, aperture}, "full" or None (full sphere)."""
    if spec is None or spec == "full":
        return Cone.full(d)
    if spec.get("full_sphere"):
        return Cone.full(d)
    return Cone(axis=tuple(spec["axis"]), aperture=float(spec["aperture"]))


# ---------------------------------------------------------------------------
# Evaluation
# ---------------------------------------------------------------------------


def _origin_value(kernel: Kernel) -> float:
    if kernel.kind in ("cone_restricted", "rescaled"):
        inner = _origin_value(kernel.base)
        return inner * kernel.scale**kernel.d * kernel.weight
    if kernel.kind == "truncated":
        return 0.0
    if kernel.is_singular:
        return math.inf
    if kernel.kind == "log":
        return 0.0
    if kernel.kind == "custom_radial":
        return 0.0 if kernel.radial_exponent > 0 else kernel.table_values[0]
    return 1.0 if kernel.radial_exponent == 0 else 0.0


def radial_profile(kernel: Kernel, r: Union[float, np.ndarray]) -> np.ndarray:
    """
    Radial profile rho(r) of a radial kernel.

    Args:
        kernel: Radial kernel
        r: Radii (>= 0)

    Returns:
        Array of profile values (inf at r = 0 for singular kernels)
    """
    r = np.asarray(r, dtype=float)
    out = np.zeros_like(r)
    pos = r > 0
    rp = r[pos]
    kind = kernel.kind

    if kind in ("fractional", "borderline", "power", "indicator"):
        exponent = kernel.radial_exponent
        out[pos] = 1.0 if exponent == 0 else rp**exponent
    elif kind == "log":
        out[pos] = -(rp ** kernel.radial_exponent) * np.log(rp)
    elif kind == "custom_radial":
        log_r = np.log(kernel.table_radii)
        log_v = np.log(kernel.table_values)
        x = np.log(rp)
        values = np.interp(x, log_r, log_v)
        below = x < log_r[0]
        slope = (log_v[1] - log_v[0]) / (log_r[1] - log_r[0])
        values[below] = log_v[0] + slope * (x[below] - log_r[0])
        out[pos] = np.exp(values)
    elif kind == "truncated":
        out[pos] = np.where(
            rp > kernel.inner_radius, radial_profile(kernel.base, rp), 0.0
        )
    elif kind == "rescaled":
        out[pos] = (
            kernel.scale**kernel.d
            * kernel.weight
            * radial_profile(kernel.base, kernel.scale * rp)
        )
    elif kind == "cone_restricted" and kernel.is_radial:
        out[pos] = radial_profile(kernel.base, rp)
    else:
        raise CapabilityError(f"Kernel {kernel.name} is not radial")

    if not np.all(pos):
        out[~pos] = _origin_value(kernel)
    out[r >= kernel.support_radius] = 0.0
    return out


def kernel_values(kernel: Kernel, xi: np.ndarray) -> np.ndarray:
    """
    Vectorized kernel evaluation without the singularity check.

    Args:
        kernel: Kernel
        xi: Offsets of shape (m, d)

    Returns:
        Values of shape (m,) (inf at xi = 0 for singular kernels)
    """
    xi = np.atleast_2d(np.asarray(xi, dtype=float))
    r = np.linalg.norm(xi, axis=1)
    if kernel.is_radial:
        return radial_profile(kernel, r)

    if kernel.kind == "cone_restricted":
        out = np.zeros(len(xi))
        mask = (r > 0) & (r < kernel.support_radius)
        if mask.any():
            mask[mask] = cone_membership(kernel.cone, xi[mask])
            out[mask] = kernel_values(kernel.base, xi[mask])
        out[r == 0] = _origin_value(kernel)
        return out
    if kernel.kind == "truncated":
        out = np.where(
            r > kernel.inner_radius, kernel_values(kernel.base, xi), 0.0
        )
    else:
        out = (
            kernel.scale**kernel.d
            * kernel.weight
            * kernel_values(kernel.base, kernel.scale * xi)
        )
    out[r >= kernel.support_radius] = 0.0
    return out


def eval_kernel(
    kernel: Kernel, xi: Union[Sequence[float], np.ndarray]
) -> Union[float, np.ndarray]:
    """
    Evaluate rho at one offset (shape (d,)) or many (shape (m, d)).

    Args:
        kernel: Kernel
        xi: Offset(s)

    Returns:
        rho(xi), zero outside the support

    Raises:
        KernelSingularityError: If a singular kernel is evaluated at 0

    Examples:
        >>> eval_kernel(fractional_kernel(2, 2.0, 0.5), [0.5, 0.0])
        2.0
    """
    xi = np.asarray(xi, dtype=float)
    single = xi.ndim <= 1
    if single and xi.size != kernel.d:
        raise ValueError(
            f"Offset has {xi.size} components, kernel has d={kernel.d}"
        )
    xi = np.atleast_2d(xi.reshape(1, kernel.d) if single else xi)
    if xi.shape[1] != kernel.d:
        raise ValueError(
            f"Offsets have dimension {xi.shape[1]}, kernel has {kernel.d}"
        )
    at_origin = np.all(xi == 0, axis=1)
    if at_origin.any() and kernel.is_singular:
        raise KernelSingularityError(
            f"Kernel {kernel.name} is singular at xi = 0"
        )
    values = kernel_values(kernel, xi)
    return float(values[0]) if single else values


def rho_theta0(
    kernel: Kernel,
    theta0: float,
    r: Union[float, np.ndarray],
    v: Sequence[float],
    n_theta: int = THETA_GRID,
) -> Union[float, np.ndarray]:
    """
    Cone-infimum kernel rho_theta0(r v) = inf_{theta in [theta0, 1]}
    rho(theta r v) theta^-p.

    The infimum is a minimum over a geometric theta-grid containing
    theta = 1, so rho_theta0 <= rho holds exactly.

    Args:
        kernel: Kernel
        theta0: Lower end of the theta range, in (0, 1)
        r: Radius or radii (> 0)
        v: Direction (normalized here)
        n_theta: Grid size

    Returns:
        rho_theta0 value(s)
    """
    if not 0 < theta0 < 1:
        raise ValueError(f"theta0 must lie in (0, 1), got {theta0}")
    r_arr = np.atleast_1d(np.asarray(r, dtype=float))
    if np.any(r_arr <= 0):
        raise ValueError("rho_theta0 needs r > 0")
    v = np.asarray(v, dtype=float)
    norm = np.linalg.norm(v)
    if v.shape != (kernel.d,) or norm == 0:
        raise ValueError(f"v must be a nonzero vector in R^{kernel.d}")
    v = v / norm
    theta = np.geomspace(theta0, 1.0, n_theta)
    theta[-1] = 1.0
    points = (r_arr[:, None, None] * theta[None, :, None]) * v
    values = kernel_values(kernel, points.reshape(-1, kernel.d))
    values = values.reshape(len(r_arr), n_theta) * theta ** (-kernel.p)
    result = values.min(axis=1)
    return float(result[0]) if np.ndim(r) == 0 else result


# ---------------------------------------------------------------------------
# Integrals
# ---------------------------------------------------------------------------


def _radial_quad(
    func, lower: float, upper: float, points=None, epsrel: float = 1e-10
) -> float:
    """Adaptive quadrature with integration warnings routed to the log."""
    options = dict(_QUAD_OPTIONS, epsrel=epsrel)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", IntegrationWarning)
        value, _ = quad(func, lower, upper, points=points, **options)
    for warning in caught:
        logger.warning("Radial quadrature: %s", warning.message)
    return value


def _breakpoints(kernel: Kernel) -> list:
    radii = [kernel.support_radius, kernel.inner_radius]
    if kernel.base is not None:
        radii += [r / kernel.scale for r in _breakpoints(kernel.base)]
    return [r for r in radii if 0 < r < math.inf]


def radial_moment(kernel: Kernel, delta: float) -> float:
    """
    int_0^delta rho(r) r^{d-1} dr for a radial kernel.

    The substitution r = delta t keeps the quadrature scale-free, with
    breakpoints at the support and truncation radii.
    """
    d = kernel.d
    points = sorted(
        {b / delta for b in _breakpoints(kernel) if 0 < b / delta < 1}
    )

    def integrand(t):
        return (
            radial_profile(kernel, np.array([delta * t]))[0]
            * t ** (d - 1)
        )

    value = _radial_quad(integrand, 0.0, 1.0, points=points or None)
    return value * delta**d


def ball_integral(kernel: Kernel, delta: float) -> float:
    """
    int_{B_delta} rho(xi) dxi.

    Radial kernels use sigma_{d-1} int_0^delta rho(r) r^{d-1} dr; a
    cone-restricted radial base uses the cap area instead of sigma_{d-1};
    other kernels integrate a radial quadrature per sphere direction.
    """
    if delta <= 0:
        raise ValueError(f"delta must be positive, got {delta}")
    d = kernel.d
    if kernel.is_radial:
        return sphere_area(d) * radial_moment(kernel, delta)
    if kernel.kind == "cone_restricted" and kernel.base.is_radial:
        reach = min(delta, kernel.support_radius)
        return cap_area(kernel.cone) * radial_moment(kernel.base, reach)

    if d == 1:
        directions, weights = np.array([[1.0], [-1.0]]), np.ones(2)
    else:
        directions, weights = sphere_quadrature(
            Cone.full(d), 256 if d == 2 else 1024
        )
    total = 0.0
    for v, w in zip(directions, weights):
        total += w * delta**d * _radial_quad(
            lambda t: kernel_values(kernel, (delta * t * v)[None, :])[0]
            * t ** (d - 1),
            0.0,
            1.0,
        )
    return total


def mass_ratio(kernel: Kernel, delta: float) -> float:
    """
    delta^p / int_{B_delta} rho.

    Args:
        kernel: Locally integrable kernel
        delta: Radius (> 0)

    Returns:
        The mass ratio

    Raises:
        DegenerateKernelError: If int_{B_delta} rho = 0

    Examples:
        >>> mass_ratio(fractional_kernel(2, 2.0, 0.5), 0.1)  # 0.1 / (2 pi)
        0.0159154...
    """
    integral = ball_integral(kernel, delta)
    if not integral > 0:
        raise DegenerateKernelError(
            f"Kernel {kernel.name} has zero mass on B_{delta:g}"
        )
    if not math.isfinite(integral):
        raise ValueError(
            f"Kernel {kernel.name} is not integrable on B_{delta:g}"
        )
    return delta**kernel.p / integral


def integrable_quotient(kernel: Kernel) -> float:
    """
    int_{B_1} |xi|^-p rho(xi) dxi, or inf when it diverges.

    A finite value means S_{rho,p} = L^p, where no compact embedding can
    hold. Divergence is detected by comparing truncations at 2^-20 and
    2^-40.
    """
    if not kernel.is_radial:
        raise CapabilityError("integrable_quotient needs a radial kernel")
    d = kernel.d

    def tail(eps: float) -> float:
        return sphere_area(d) * _radial_quad(
            lambda r: radial_profile(kernel, np.array([r]))[0]
            * r ** (d - 1 - kernel.p),
            eps,
            1.0,
            points=[b for b in _breakpoints(kernel) if eps < b < 1] or None,
        )

    coarse, fine = tail(2.0**-20), tail(2.0**-40)
    if fine - coarse > 1e-6 * max(fine, 1e-300):
        return math.inf
    return fine


# ---------------------------------------------------------------------------
# Condition checks
# ---------------------------------------------------------------------------


@dataclass
class KernelConditionReport:
    """
    Outcome of a kernel admissibility check.

    Attributes:
        condition_id: radial_monotone, mass_ratio_limit or cone_condition
        samples: (delta, ratio) pairs with strictly decreasing delta
        fitted_log_slope: Slope of log(ratio) against log(delta)
        verdict: satisfied, violated or inconclusive
        details: Extra diagnostics (defects, tolerances)
    """

    condition_id: str
    samples: list
    fitted_log_slope: Optional[float]
    verdict: str
    details: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "condition_id": self.condition_id,
            "samples": [list(s) for s in self.samples],
            "fitted_log_slope": self.fitted_log_slope,
            "verdict": self.verdict,
            "details": self.details,
        }

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.samples, columns=["delta", "ratio"])


def _fit_log_slope(deltas: np.ndarray, ratios: np.ndarray) -> float:
    keep = ratios > 0
    if keep.sum() < 2:
        return float("nan")
    slope, _ = np.polyfit(np.log(deltas[keep]), np.log(ratios[keep]), 1)
    return float(slope)


def _limit_verdict(slope: float, last_ratio: float) -> str:
    if slope > SLOPE_TOL and last_ratio < RATIO_TOL:
        return "satisfied"
    if slope < -SLOPE_TOL:
        return "violated"
    return "inconclusive"


def _check_delta_sequence(deltas: Sequence[float]) -> np.ndarray:
    deltas = np.asarray(deltas, dtype=float)
    if deltas.ndim != 1 or len(deltas) < 4:
        raise ValueError("delta_sequence needs at least 4 values")
    if np.any(deltas <= 0):
        raise ValueError("delta_sequence must be positive")
    q = deltas[1:] / deltas[:-1]
    if np.any(q >= 1) or np.any(np.abs(q - q[0]) > 1e-6 * q[0]):
        raise ValueError(
            "delta_sequence must be geometric with ratio in (0, 1)"
        )
    return deltas


def _direction_probes(d: int) -> np.ndarray:
    if d == 1:
        return np.array([[1.0], [-1.0]])
    if d == 2:
        angles = np.arange(8) * np.pi / 4
        return np.stack([np.cos(angles), np.sin(angles)], axis=1)
    probes, _ = sphere_quadrature(Cone.full(3), 16)
    return np.vstack([np.eye(3)[0], probes])


def check_radial_monotone(
    kernel: Kernel, probe_radii: Sequence[float], rel_tol: float = REL_TOL
) -> KernelConditionReport:
    """
    Check that rho is radial and r^-p rho(r) is nonincreasing.

    Args:
        kernel: Kernel
        probe_radii: Strictly increasing positive radii
        rel_tol: Relative tolerance for both tests

    Returns:
        KernelConditionReport with samples (r, r^-p rho(r e1)) ordered by
        decreasing r
    """
    radii = np.asarray(probe_radii, dtype=float)
    if radii.size == 0:
        raise ValueError("probe_radii must not be empty")
    if np.any(radii <= 0) or np.any(np.diff(radii) <= 0):
        raise ValueError("probe_radii must be positive and increasing")

    directions = _direction_probes(kernel.d)
    points = radii[None, :, None] * directions[:, None, :]
    values = kernel_values(kernel, points.reshape(-1, kernel.d)).reshape(
        len(directions), len(radii)
    )
    quotient = values * radii[None, :] ** (-kernel.p)

    scale = np.maximum(np.abs(quotient[0]), np.finfo(float).tiny)
    spread = np.max(np.abs(quotient - quotient[0]), axis=0) / scale
    radial_defect = float(spread.max())
    steps = np.diff(quotient[0]) / scale[:-1]
    monotone_defect = float(max(steps.max(initial=0.0), 0.0))

    verdict = "satisfied"
    if radial_defect > rel_tol or monotone_defect > rel_tol:
        verdict = "violated"
    samples = [
        (float(r), float(q)) for r, q in zip(radii[::-1], quotient[0][::-1])
    ]
    report = KernelConditionReport(
        condition_id="radial_monotone",
        samples=samples,
        fitted_log_slope=_fit_log_slope(radii, quotient[0]),
        verdict=verdict,
        details={
            "radial_defect": radial_defect,
            "monotone_defect": monotone_defect,
            "rel_tol": rel_tol,
        },
    )
    logger.info("radial_monotone for %s: %s", kernel.name, verdict)
    return report


def check_mass_ratio_limit(
    kernel: Kernel, delta_sequence: Optional[Sequence[float]] = None
) -> KernelConditionReport:
    """
    Fit the decay of delta^p / int_{B_delta} rho along delta -> 0.

    Args:
        kernel: Kernel
        delta_sequence: Geometric decreasing sequence (default 2^-1..2^-40)

    Returns:
        KernelConditionReport; satisfied when the fitted log-slope exceeds
        SLOPE_TOL and the last ratio is below RATIO_TOL, violated when the
        slope is below -SLOPE_TOL, inconclusive otherwise
    """
    deltas = _check_delta_sequence(
        DEFAULT_DELTAS if delta_sequence is None else delta_sequence
    )
    ratios = np.array([mass_ratio(kernel, delta) for delta in deltas])
    slope = _fit_log_slope(deltas, ratios)
    verdict = _limit_verdict(slope, float(ratios[-1]))
    logger.info(
        "mass_ratio_limit for %s: slope=%.4g last=%.4g -> %s",
        kernel.name,
        slope,
        ratios[-1],
        verdict,
    )
    return KernelConditionReport(
        condition_id="mass_ratio_limit",
        samples=[(float(a), float(b)) for a, b in zip(deltas, ratios)],
        fitted_log_slope=slope,
        verdict=verdict,
        details={"slope_tol": SLOPE_TOL, "ratio_tol": RATIO_TOL},
    )


def cone_denominator(
    kernel: Kernel,
    theta0: float,
    cone: Cone,
    delta: float,
    n_theta: int = THETA_GRID,
) -> float:
    """int_0^delta rho_theta0(r v0) r^{d-1} dr along the cone axis."""
    d = kernel.d
    axis = np.asarray(cone.axis)
    points = sorted(
        {b / delta for b in _breakpoints(kernel) if 0 < b / delta < 1}
    )
    value = _radial_quad(
        lambda t: rho_theta0(kernel, theta0, delta * t, axis, n_theta)
        * t ** (d - 1),
        0.0,
        1.0,
        points=points or None,
    )
    return value * delta**d


def check_cone_condition(
    kernel: Kernel,
    theta0: float,
    cone: Cone,
    delta_sequence: Optional[Sequence[float]] = None,
    rel_tol: float = REL_TOL,
    probe_radii: Optional[Sequence[float]] = None,
    n_theta: int = THETA_GRID,
) -> KernelConditionReport:
    """
    Check the cone condition for a (possibly non-radial) kernel.

    First rho_theta0(r v) is compared with rho_theta0(r v0) for sampled
    v in Lambda; then the ratio delta^p / int_0^delta rho_theta0(r v0)
    r^{d-1} dr is fitted as in :func:`check_mass_ratio_limit`.

    Args:
        kernel: Kernel
        theta0: Infimum range parameter in (0, 1)
        cone: Direction set Lambda
        delta_sequence: Geometric decreasing sequence (default 2^-1..2^-40)
        rel_tol: Tolerance for direction independence
        probe_radii: Radii for the direction test
        n_theta: Size of the theta-grid of rho_theta0

    Returns:
        KernelConditionReport

    Raises:
        DegenerateKernelError: If the denominator vanishes for every delta
    """
    if not 0 < theta0 < 1:
        raise ValueError(f"theta0 must lie in (0, 1), got {theta0}")
    if cone.d != kernel.d:
        raise ValueError("Cone and kernel dimensions differ")
    deltas = _check_delta_sequence(
        DEFAULT_DELTAS if delta_sequence is None else delta_sequence
    )
    axis = np.asarray(cone.axis)
    if probe_radii is None:
        reach = min(1.0, kernel.support_radius)
        probe_radii = np.geomspace(1e-3 * reach, 0.9 * reach, 12)
    probe_radii = np.asarray(probe_radii, dtype=float)

    directions, _ = sphere_quadrature(cone, 16 if kernel.d < 3 else 32)
    reference = rho_theta0(kernel, theta0, probe_radii, axis, n_theta)
    scale = np.maximum(np.abs(reference), np.finfo(float).tiny)
    direction_defect = 0.0
    for v in directions:
        other = rho_theta0(kernel, theta0, probe_radii, v, n_theta)
        direction_defect = max(
            direction_defect, float(np.max(np.abs(other - reference) / scale))
        )

    denominators = np.array(
        [
            cone_denominator(kernel, theta0, cone, delta, n_theta)
            for delta in deltas
        ]
    )
    if not np.any(denominators > 0):
        raise DegenerateKernelError(
            f"rho_theta0 of {kernel.name} vanishes along the cone axis"
        )
    positive = denominators > 0
    ratios = deltas[positive] ** kernel.p / denominators[positive]
    slope = _fit_log_slope(deltas[positive], ratios)

    if direction_defect > rel_tol or not positive.all():
        verdict = "violated"
    else:
        verdict = _limit_verdict(slope, float(ratios[-1]))
    logger.info(
        "cone_condition for %s: defect=%.3g slope=%.4g -> %s",
        kernel.name,
        direction_defect,
        slope,
        verdict,
    )
    return KernelConditionReport(
        condition_id="cone_condition",
        samples=[
            (float(a), float(b)) for a, b in zip(deltas[positive], ratios)
        ],
        fitted_log_slope=slope,
        verdict=verdict,
        details={
            "theta0": theta0,
            "direction_defect": direction_defect,
            "vanishing_deltas": int((~positive).sum()),
            "slope_tol": SLOPE_TOL,
            "ratio_tol": RATIO_TOL,
            "rel_tol": rel_tol,
        },
    )


@dataclass
class DiracSequenceReport:
    """Unit-mass and tail-mass diagnostics for a kernel sequence."""

    masses: list
    radii: list
    tail_masses: list
    unit_mass: bool
    tails_vanish: bool

    def to_dict(self) -> dict:
        return {
            "masses": self.masses,
            "radii": self.radii,
            "tail_masses": self.tail_masses,
            "unit_mass": self.unit_mass,
            "tails_vanish": self.tails_vanish,
        }


def check_dirac_sequence(
    kernels: Sequence[Kernel],
    radii: Sequence[float] = (0.5, 0.25, 0.1),
    tol: float = 1e-6,
) -> DiracSequenceReport:
    """
    Check int rho_n = 1 and int_{|xi| > r} rho_n -> 0 for every r.

    Args:
        kernels: Radial kernels rho_1, rho_2, ... with bounded support
        radii: Radii r at which tail masses are measured
        tol: Tolerance on the unit mass

    Returns:
        DiracSequenceReport; tails_vanish requires tail masses that do not
        grow along the sequence and vanish at the largest radius for the
        last member
    """
    radii = sorted(radii, reverse=True)
    masses, tails = [], []
    for kernel in kernels:
        if not math.isfinite(kernel.support_radius):
            raise CapabilityError("Dirac sequences need bounded support")
        mass = ball_integral(kernel, kernel.support_radius)
        masses.append(mass)
        tails.append(
            [
                max(mass - ball_integral(kernel, r), 0.0)
                if r < kernel.support_radius
                else 0.0
                for r in radii
            ]
        )
    unit = all(abs(m - 1) <= tol for m in masses)
    table = np.asarray(tails)
    vanish = bool(
        np.all(np.diff(table, axis=0) <= tol) and table[-1, 0] <= tol
    )
    return DiracSequenceReport(
        masses=masses,
        radii=list(radii),
        tail_masses=tails,
        unit_mass=unit,
        tails_vanish=vanish,
    )
