"""Flat key = value configuration files (dotted sections, '#' comments).

Example::

    scenario.name = decay-1d
    mesh.kind = interval
    mesh.a = 0.0
    mesh.b = 1.0
    mesh.elements = 200
    geometry.x0 = 0.0
    coupling.rho = 1.0
    time.dt = 1e-3
    time.t_end = 50.0
    initial.u0 = eigenfunction
    initial.u0_amplitude = 0.1
"""

from __future__ import annotations

from .dynamics import FieldInit, ScenarioConfig


class ConfigError(Exception):
    """Malformed, missing, or inconsistent configuration."""


_KNOWN_KEYS = {
    "scenario.name",
    "mesh.kind", "mesh.a", "mesh.b", "mesh.elements",
    "mesh.lo", "mesh.hi", "mesh.nx", "mesh.ny",
    "geometry.x0",
    "coupling.rho", "coupling.enabled", "coupling.quad_degree",
    "delta.kind", "delta.value", "delta.floor",
    "time.dt", "time.t_end", "time.stride",
    "solver.tol", "solver.max_iter",
    "constants.safety",
    "initial.u0", "initial.u0_amplitude", "initial.u0_scale", "initial.u0_file",
    "initial.v0", "initial.v0_amplitude", "initial.v0_scale", "initial.v0_file",
    "initial.u1", "initial.u1_amplitude", "initial.u1_scale", "initial.u1_file",
    "initial.v1", "initial.v1_amplitude", "initial.v1_scale", "initial.v1_file",
    "hypotheses.rho", "hypotheses.n", "hypotheses.theta",
}


def parse_config_text(text: str) -> dict[str, str]:
    cfg: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if not key or not value:
            raise ConfigError(f"line {lineno}: empty key or value in {raw!r}")
        if key not in _KNOWN_KEYS:
            raise ConfigError(f"line {lineno}: unknown config key '{key}'")
        cfg[key] = value
    return cfg


def load_config(path) -> dict[str, str]:
    try:
        with open(path) as fh:
            return parse_config_text(fh.read())
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc


def _get(cfg, key, default=None, required=False):
    if key in cfg:
        return cfg[key]
    if required:
        raise ConfigError(f"missing config key: {key}")
    return default


def _get_float(cfg, key, default=None, required=False):
    raw = _get(cfg, key, default=None, required=required)
    if raw is None:
        return default
    try:
        return float(raw)
    except ValueError:
        raise ConfigError(f"config key {key} must be a number, got {raw!r}") from None


def _get_int(cfg, key, default=None, required=False):
    raw = _get(cfg, key, default=None, required=required)
    if raw is None:
        return default
    try:
        return int(raw)
    except ValueError:
        raise ConfigError(f"config key {key} must be an integer, got {raw!r}") from None


def _get_bool(cfg, key, default):
    raw = _get(cfg, key)
    if raw is None:
        return default
    low = raw.lower()
    if low in ("true", "yes", "on", "1"):
        return True
    if low in ("false", "no", "off", "0"):
        return False
    raise ConfigError(f"config key {key} must be a boolean, got {raw!r}")


def _get_floats(cfg, key, required=False):
    raw = _get(cfg, key, required=required)
    if raw is None:
        return None
    try:
        return tuple(float(tok) for tok in raw.split())
    except ValueError:
        raise ConfigError(f"config key {key} must be numbers, got {raw!r}") from None


def _field_init(cfg, name: str) -> FieldInit:
    preset = _get(cfg, f"initial.{name}", default="zero")
    scale = _get(cfg, f"initial.{name}_scale", default="relative")
    if scale not in ("relative", "absolute"):
        raise ConfigError(f"initial.{name}_scale must be 'relative' or 'absolute'")
    try:
        return FieldInit(
            preset=preset,
            amplitude=_get_float(cfg, f"initial.{name}_amplitude", default=0.1),
            relative=scale == "relative",
            path=_get(cfg, f"initial.{name}_file"),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def scenario_from_config(cfg: dict[str, str]) -> ScenarioConfig:
    """Typed scenario from a flat config dict; errors name the bad key."""
    kind = _get(cfg, "mesh.kind", required=True)
    if kind not in ("interval", "rectangle"):
        raise ConfigError(f"mesh.kind must be 'interval' or 'rectangle', got {kind!r}")
    rho = _get_float(cfg, "coupling.rho", default=1.0)
    if rho is None or rho <= 0:
        raise ConfigError(f"coupling.rho must be positive, got {rho}")
    x0 = _get_floats(cfg, "geometry.x0", required=True)
    expected_dim = 1 if kind == "interval" else 2
    if len(x0) != expected_dim:
        raise ConfigError(
            f"geometry.x0 needs {expected_dim} coordinate(s) for a {kind} mesh, got {len(x0)}"
        )
    kwargs = dict(
        name=_get(cfg, "scenario.name", default="scenario"),
        mesh_kind=kind,
        x0=x0,
        rho=rho,
        quad_degree=_get_int(cfg, "coupling.quad_degree"),
        coupling_enabled=_get_bool(cfg, "coupling.enabled", True),
        delta_kind=_get(cfg, "delta.kind", default="mdotnu"),
        delta_value=_get_float(cfg, "delta.value", default=1.0),
        delta_floor=_get_float(cfg, "delta.floor", default=0.0),
        dt=_get_float(cfg, "time.dt"),
        t_end=_get_float(cfg, "time.t_end", default=1.0),
        stride=_get_int(cfg, "time.stride", default=10),
        solver_tol=_get_float(cfg, "solver.tol", default=1e-10),
        solver_max_iter=_get_int(cfg, "solver.max_iter", default=50),
        safety=_get_float(cfg, "constants.safety", default=1.1),
        u0=_field_init(cfg, "u0"),
        v0=_field_init(cfg, "v0"),
        u1=_field_init(cfg, "u1"),
        v1=_field_init(cfg, "v1"),
    )
    if kind == "interval":
        kwargs["interval"] = (
            _get_float(cfg, "mesh.a", required=True),
            _get_float(cfg, "mesh.b", required=True),
        )
        kwargs["elements"] = _get_int(cfg, "mesh.elements", required=True)
    else:
        lo = _get_floats(cfg, "mesh.lo", required=True)
        hi = _get_floats(cfg, "mesh.hi", required=True)
        if len(lo) != 2 or len(hi) != 2:
            raise ConfigError("mesh.lo and mesh.hi must each hold two numbers")
        kwargs["rect_lo"], kwargs["rect_hi"] = lo, hi
        kwargs["nx"] = _get_int(cfg, "mesh.nx", required=True)
        kwargs["ny"] = _get_int(cfg, "mesh.ny", required=True)
    try:
        return ScenarioConfig(**kwargs)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def hypotheses_from_config(cfg: dict[str, str]) -> tuple[float, int, float | None]:
    """(rho, n, theta) for the hypothesis validator; n defaults to the mesh
    dimension, rho to the coupling exponent."""
    rho = _get_float(cfg, "hypotheses.rho")
    if rho is None:
        rho = _get_float(cfg, "coupling.rho", default=1.0)
    n = _get_int(cfg, "hypotheses.n")
    if n is None:
        kind = _get(cfg, "mesh.kind")
        if kind is None:
            raise ConfigError("missing config key: hypotheses.n (or mesh.kind to infer it)")
        n = 1 if kind == "interval" else 2
    theta = _get_float(cfg, "hypotheses.theta")
    if rho <= 0:
        raise ConfigError(f"coupling.rho must be positive, got {rho}")
    return rho, n, theta
