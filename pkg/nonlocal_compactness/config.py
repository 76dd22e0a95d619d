"""
Experiment configuration.

Configs are JSON documents::

    {
      "command": "kernel-check",
      "kernel": {"kind": "fractional", "d": 2, "p": 2, "s": 0.5},
      "parameters": {"deltas": [0.5, 0.25, 0.125, 0.0625]}
    }

``parse_config`` validates the document, fills defaults and returns a
frozen :class:`ExperimentConfig`; ``serialize_config`` is its inverse.
The ``build_*`` helpers turn a config into library objects.
"""

import dataclasses
import json
import logging
import math
import re
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Optional, Union

import numpy as np
import pandas as pd

from .errors import ConfigError
from .fields import (
    SEQUENCE_KINDS,
    SubspaceSpec,
    VectorField,
    make_field,
    read_field_csv,
    sample_field,
)
from .geometry import (
    SUPPORTED_SHAPES,
    Cone,
    Domain,
    Grid,
    ball_domain,
    box_domain,
    graph_patch_from_table,
)
from .geometry import build_grid as grid_from_domain
from .kernels import FAMILIES, THETA_GRID, Kernel, make_cone, make_kernel

logger = logging.getLogger(__name__)

COMMANDS = (
    "kernel-check",
    "seminorm",
    "mollify",
    "poincare",
    "boundary",
    "compactness",
    "sequence",
)

TOP_KEYS = {
    "command",
    "kernel",
    "domain",
    "grid",
    "field",
    "sequence",
    "parameters",
    "output",
}
KERNEL_KEYS = {
    "kind",
    "d",
    "p",
    "s",
    "exponent",
    "support_radius",
    "base_kind",
    "cone",
    "table",
}
DOMAIN_KEYS = {"shape", "bounds", "center", "radius", "zeta_table", "r0"}
GRID_KEYS = {"h", "n_per_axis"}
FIELD_KEYS = {
    "name",
    "path",
    "value",
    "A",
    "b",
    "k",
    "component",
    "amplitude",
    "center",
    "radius",
    "direction",
}
SEQUENCE_KEYS = {
    "kind",
    "family",
    "n_values",
    "k0",
    "axis",
    "component",
    "scale",
    "center",
    "direction",
    "radius",
    "shift",
    "normalize",
    "smoothness",
    "modes",
    "interior",
    "field",
}
PARAMETER_KEYS = {
    "p",
    "deltas",
    "radii",
    "theta0",
    "cone",
    "seed",
    "epsilon0",
    "theta_grid",
    "symgrad",
    "error_estimate",
    "subspace",
    "normalize_seminorm",
    "extension",
    "threads",
    "r0",
    "restarts",
}

# Sections each command needs
REQUIRED = {
    "kernel-check": ("kernel",),
    "seminorm": ("kernel", "domain", "grid", "field"),
    "mollify": ("domain", "grid", "field"),
    "poincare": ("kernel", "domain", "grid"),
    "boundary": ("kernel", "domain", "grid", "field"),
    "compactness": ("kernel", "domain", "grid", "sequence"),
    "sequence": ("kernel", "domain", "grid", "sequence"),
}

DEFAULT_EPSILON0 = 1.0 / 16
DEFAULT_THETA0 = 0.5
DEFAULT_OUTPUT = "results"


@dataclass(frozen=True)
class ExperimentConfig:
    """
    Validated experiment configuration.

    Attributes:
        command: One of COMMANDS
        kernel: Kernel spec (see kernels.make_kernel)
        domain: Domain spec {shape, ...}
        grid: Grid spec {h} or {n_per_axis}
        field: Field spec {name, ...} or {path}
        sequence: Sequence spec {kind, ...}, with family and n_values for
            kernel-sequence experiments
        p: Exponent (parameters.p, else the kernel's p)
        deltas: Strictly decreasing positive radii, if given
        radii: Positive radii for boundary checks, if given
        theta0: Cone-infimum parameter
        cone: Cone spec for mollifiers and cone conditions
        seed: Random seed
        epsilon0: Collar fraction of the boundary lemma
        theta_grid: Size of the theta-grid of rho_theta0
        symgrad: Also run the Sym(grad u) bound (seminorm command)
        error_estimate: Attach the grid-halving error estimate
        subspace: Constraints of the Poincare subspace
        normalize_seminorm: Rescale probe fields to unit seminorm
        extension: Mollifier extension mode
        threads: joblib workers
        r0: Upper radius for boundary checks
        restarts: Descent restarts for general-p Poincare estimates
        output: Output directory
    """

    command: str
    kernel: Optional[dict] = None
    domain: Optional[dict] = None
    grid: Optional[dict] = None
    field: Optional[dict] = None
    sequence: Optional[dict] = None
    p: Optional[float] = None
    deltas: Optional[tuple] = None
    radii: Optional[tuple] = None
    theta0: float = DEFAULT_THETA0
    cone: Optional[Union[dict, str]] = None
    seed: int = 0
    epsilon0: float = DEFAULT_EPSILON0
    theta_grid: int = THETA_GRID
    symgrad: bool = False
    error_estimate: bool = False
    subspace: tuple = ("mean", "skew_moment")
    normalize_seminorm: bool = False
    extension: str = "zero"
    threads: int = 1
    r0: Optional[float] = None
    restarts: int = 10
    output: str = DEFAULT_OUTPUT
    base_dir: str = dataclasses.field(default=".", compare=False)

    def with_overrides(self, **changes) -> "ExperimentConfig":
        """Copy with command-line overrides (None values are ignored)."""
        changes = {k: v for k, v in changes.items() if v is not None}
        return replace(self, **changes)


def _line_of(text: str, key: str) -> Optional[int]:
    match = re.search(r'"' + re.escape(key) + r'"\s*:', text)
    if match is None:
        return None
    return text.count("\n", 0, match.start()) + 1


def _check_keys(section: dict, allowed: set, text: str, where: str) -> None:
    if not isinstance(section, dict):
        raise ConfigError(f"'{where}' must be an object", key=where)
    for key in section:
        if key not in allowed:
            raise ConfigError(
                f"Unknown key '{key}' in {where}. "
                f"Must be one of: {sorted(allowed)}",
                key=key,
                line=_line_of(text, key),
            )


def _resolve_path(path: str, base_dir: Path, key: str, text: str) -> str:
    resolved = (base_dir / path).resolve()
    if not resolved.exists():
        raise ConfigError(
            f"File not found: {path}", key=key, line=_line_of(text, key)
        )
    return str(resolved)


def _fail(message: str, key: str, text: str) -> ConfigError:
    return ConfigError(message, key=key, line=_line_of(text, key))


def _check_p(p, text: str) -> float:
    try:
        p = float(p)
    except (TypeError, ValueError):
        raise _fail(f"p must be a number, got {p!r}", "p", text)
    if not (p >= 1 and math.isfinite(p)):
        raise _fail(f"p ≥ 1 required, got p={p:g}", "p", text)
    return p


def _check_deltas(values, text: str, key: str = "deltas") -> tuple:
    values = tuple(float(x) for x in values)
    if not values:
        raise _fail(f"{key} must not be empty", key, text)
    if any(x <= 0 for x in values):
        raise _fail(f"{key} must be positive", key, text)
    if any(b >= a for a, b in zip(values, values[1:])):
        raise _fail(f"{key} must be strictly decreasing", key, text)
    return values


def parse_config(
    text: str,
    base_dir: Optional[Union[str, Path]] = None,
    command: Optional[str] = None,
) -> ExperimentConfig:
    """
    Parse and validate a JSON experiment config.

    Args:
        text: JSON document
        base_dir: Directory relative file paths are resolved against
        command: Command from the command line (overrides the document)

    Returns:
        ExperimentConfig with defaults filled in

    Raises:
        ConfigError: On malformed JSON, unknown keys, invalid values or
            missing files; carries the offending key and line

    Examples:
        >>> parse_config('{"command": "kernel-check", "kernel": {"kind": '
        ...              '"fractional", "d": 2, "p": 2, "s": 0.5}}').epsilon0
        0.0625
    """
    base = Path(base_dir) if base_dir is not None else Path(".")
    try:
        document = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(f"Malformed JSON: {e.msg}", line=e.lineno)
    _check_keys(document, TOP_KEYS, text, "config")

    command = command or document.get("command")
    if command not in COMMANDS:
        raise _fail(
            f"Unknown command '{command}'. Must be one of: {list(COMMANDS)}",
            "command",
            text,
        )
    for section in REQUIRED[command]:
        if section not in document:
            raise ConfigError(
                f"Command '{command}' needs a '{section}' section",
                key=section,
            )

    kernel = document.get("kernel")
    if kernel is not None:
        _check_keys(kernel, KERNEL_KEYS, text, "kernel")
        for key in ("kind", "d", "p"):
            if key not in kernel:
                raise ConfigError(
                    f"kernel needs '{key}'",
                    key=key,
                    line=_line_of(text, "kernel"),
                )
        _check_p(kernel["p"], text)
        kernel = dict(kernel)
        if "table" in kernel:
            kernel["table"] = _resolve_path(
                kernel["table"], base, "table", text
            )

    domain = document.get("domain")
    if domain is not None:
        _check_keys(domain, DOMAIN_KEYS, text, "domain")
        if domain.get("shape") not in SUPPORTED_SHAPES:
            raise _fail(
                f"Unknown domain shape '{domain.get('shape')}'. "
                f"Must be one of: {list(SUPPORTED_SHAPES)}",
                "shape",
                text,
            )
        domain = dict(domain)
        if "zeta_table" in domain:
            domain["zeta_table"] = _resolve_path(
                domain["zeta_table"], base, "zeta_table", text
            )

    grid = document.get("grid")
    if grid is not None:
        _check_keys(grid, GRID_KEYS, text, "grid")
        if len(grid) != 1:
            raise _fail(
                "grid needs exactly one of h or n_per_axis", "grid", text
            )

    field_spec = document.get("field")
    if field_spec is not None:
        _check_keys(field_spec, FIELD_KEYS, text, "field")
        field_spec = dict(field_spec)
        if "path" in field_spec:
            field_spec["path"] = _resolve_path(
                field_spec["path"], base, "path", text
            )
        elif "name" not in field_spec:
            raise _fail("field needs a name or a path", "field", text)

    sequence = document.get("sequence")
    if sequence is not None:
        _check_keys(sequence, SEQUENCE_KEYS, text, "sequence")
        if sequence.get("kind") not in SEQUENCE_KINDS:
            raise _fail(
                f"Unknown sequence kind '{sequence.get('kind')}'. "
                f"Must be one of: {list(SEQUENCE_KINDS)}",
                "kind",
                text,
            )
        if command == "sequence" and sequence.get("family") not in FAMILIES:
            raise _fail(
                f"Unknown kernel family '{sequence.get('family')}'. "
                f"Must be one of: {list(FAMILIES.keys())}",
                "family",
                text,
            )

    params = document.get("parameters", {})
    _check_keys(params, PARAMETER_KEYS, text, "parameters")
    values = {}
    if "p" in params:
        values["p"] = _check_p(params["p"], text)
    elif kernel is not None:
        values["p"] = float(kernel["p"])
    if "deltas" in params:
        values["deltas"] = _check_deltas(params["deltas"], text)
    if "radii" in params:
        radii = tuple(float(r) for r in params["radii"])
        if not radii or any(r <= 0 for r in radii):
            raise _fail("radii must be positive", "radii", text)
        values["radii"] = radii
    if "theta0" in params:
        theta0 = float(params["theta0"])
        if not 0 < theta0 < 1:
            raise _fail(
                f"theta0 must lie in (0, 1), got {theta0}", "theta0", text
            )
        values["theta0"] = theta0
    if "epsilon0" in params:
        epsilon0 = float(params["epsilon0"])
        if not 0 < epsilon0 <= 0.125:
            raise _fail(
                f"epsilon0 must lie in (0, 1/8], got {epsilon0}",
                "epsilon0",
                text,
            )
        values["epsilon0"] = epsilon0
    for key in ("seed", "theta_grid", "threads", "restarts"):
        if key in params:
            value = params[key]
            if isinstance(value, bool) or not isinstance(value, int):
                raise _fail(f"{key} must be an integer", key, text)
            values[key] = value
    if values.get("seed", 0) < 0:
        raise _fail("seed must be nonnegative", "seed", text)
    if values.get("theta_grid", THETA_GRID) < 2:
        raise _fail("theta_grid must be at least 2", "theta_grid", text)
    if values.get("threads", 1) < 1 or values.get("restarts", 1) < 1:
        raise _fail(
            "threads and restarts must be positive", "threads", text
        )
    for key in ("symgrad", "error_estimate", "normalize_seminorm"):
        if key in params:
            values[key] = bool(params[key])
    if "subspace" in params:
        try:
            values["subspace"] = SubspaceSpec(
                tuple(params["subspace"])
            ).constraints
        except ValueError as e:
            raise _fail(str(e), "subspace", text)
    if "extension" in params:
        if params["extension"] not in ("zero", "periodic", "expression"):
            raise _fail(
                f"Unknown extension '{params['extension']}'",
                "extension",
                text,
            )
        values["extension"] = params["extension"]
    if "cone" in params:
        values["cone"] = params["cone"]
    if "r0" in params:
        values["r0"] = float(params["r0"])

    output = document.get("output", DEFAULT_OUTPUT)
    return ExperimentConfig(
        command=command,
        kernel=kernel,
        domain=domain,
        grid=grid,
        field=field_spec,
        sequence=sequence,
        output=str(output),
        base_dir=str(base),
        **values,
    )


def load_config(
    path: Union[str, Path], command: Optional[str] = None
) -> ExperimentConfig:
    """Read and parse a config file; relative paths resolve next to it."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"File not found: {path}")
    return parse_config(path.read_text(), path.parent, command)


def serialize_config(config: ExperimentConfig) -> str:
    """JSON document that parses back to an equal config."""
    document = {"command": config.command, "output": config.output}
    for section in ("kernel", "domain", "grid", "field", "sequence"):
        value = getattr(config, section)
        if value is not None:
            document[section] = value
    params = {
        "theta0": config.theta0,
        "seed": config.seed,
        "epsilon0": config.epsilon0,
        "theta_grid": config.theta_grid,
        "symgrad": config.symgrad,
        "error_estimate": config.error_estimate,
        "subspace": list(config.subspace),
        "normalize_seminorm": config.normalize_seminorm,
        "extension": config.extension,
        "threads": config.threads,
        "restarts": config.restarts,
    }
    for key in ("p", "cone", "r0"):
        if getattr(config, key) is not None:
            params[key] = getattr(config, key)
    for key in ("deltas", "radii"):
        if getattr(config, key) is not None:
            params[key] = list(getattr(config, key))
    document["parameters"] = params
    return json.dumps(document, indent=2, sort_keys=True)


# ---------------------------------------------------------------------------
# Builders
# ---------------------------------------------------------------------------


def _wrap(key: str, func, *args):
    try:
        return func(*args)
    except (KeyError, TypeError, ValueError) as e:
        if isinstance(e, ConfigError):
            raise
        raise ConfigError(f"Invalid {key}: {e}", key=key) from e


def build_kernel(config: ExperimentConfig) -> Kernel:
    return _wrap("kernel", make_kernel, config.kernel)


def load_zeta_table(path: str) -> tuple[list, np.ndarray]:
    """
    Read a graph profile table.

    Columns x1, zeta (d = 2) or x1, x2, zeta (d = 3, long format over a
    tensor grid).
    """
    df = pd.read_csv(path)
    if "zeta" not in df.columns or "x1" not in df.columns:
        raise ValueError(f"{path} needs columns x1[, x2], zeta")
    if "x2" in df.columns:
        table = df.pivot(index="x1", columns="x2", values="zeta")
        axes = [table.index.to_numpy(float), table.columns.to_numpy(float)]
        return axes, table.to_numpy(float)
    df = df.sort_values("x1")
    return [df["x1"].to_numpy(float)], df["zeta"].to_numpy(float)


def _make_domain(spec: dict) -> Domain:
    shape = spec["shape"]
    if shape == "box":
        lo, hi = spec["bounds"]
        return box_domain(lo, hi)
    if shape == "ball":
        return ball_domain(spec["center"], float(spec["radius"]))
    axes, values = load_zeta_table(spec["zeta_table"])
    return graph_patch_from_table(axes, values, float(spec["r0"]))


def build_domain(config: ExperimentConfig) -> Domain:
    return _wrap("domain", _make_domain, config.domain)


def build_grid(config: ExperimentConfig) -> Grid:
    domain = build_domain(config)
    return _wrap(
        "grid",
        lambda: grid_from_domain(
            domain,
            h=config.grid.get("h"),
            n_per_axis=config.grid.get("n_per_axis"),
        ),
    )


def build_field(config: ExperimentConfig, grid: Grid) -> VectorField:
    spec = config.field
    if "path" in spec:
        return _wrap("field", read_field_csv, spec["path"], grid)
    expr = _wrap("field", make_field, spec, grid.d)
    return _wrap("field", sample_field, expr, grid)


def build_cone(config: ExperimentConfig, d: int) -> Cone:
    return _wrap("cone", make_cone, config.cone, d)


def build_subspace(config: ExperimentConfig) -> SubspaceSpec:
    return SubspaceSpec(tuple(config.subspace))
