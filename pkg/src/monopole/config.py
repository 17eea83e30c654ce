"""Flat key=value run configuration.

No nesting, no quoting: one `key = value` per line, `#` comments, blank lines
ignored.  Unknown keys are hard errors -- in a numerics tool a misspelled
tolerance must fail loudly, not silently fall back to a default.  A saved
config is normalized (canonical key order, repr-formatted numbers) so that
save(load(x)) is byte-identical for normalized files.
"""

import math
from dataclasses import dataclass, fields

from .errors import ConfigError

MODES = ("simulate", "picard", "gaugefix", "estimates", "admissible",
         "residuals")


def _bool(text):
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


@dataclass
class RunConfig:
    """Every knob a run can turn, with working defaults.

    `phi_amplitude` and `a` accept -1 as "derive from the primary value"
    (amplitude and the regularity-dependent default weight, respectively).
    """

    mode: str = "simulate"
    # grid
    n_points: int = 64
    length: float = 2.0 * math.pi
    rank: int = 2
    # time stepping
    time_horizon: float = 0.5
    dt: float = 0.0125
    snapshot_stride: int = 1
    # synthetic data
    seed: int = 0
    band: int = 4
    amplitude: float = 0.05
    phi_amplitude: float = -1.0
    # restrict synthetic data to the point-reflection sector, whose harmonic
    # means vanish; refinement studies need this, generic runs do not
    point_symmetric: bool = False
    # thresholds and tolerances
    smallness: float = 0.5
    gauge_smallness: float = 0.1
    gauge_sobolev_index: float = 0.3
    tol_coulomb: float = 1e-9
    tol_elliptic: float = 1e-10
    tol_mean: float = 1e-10
    tol_reconstruct: float = 1e-6
    norm_cap: float = 100.0
    cfl_cap: float = 8.0
    dealias: bool = True
    # picard
    picard_iterations: int = 8
    # analysis
    s: float = 0.3
    a: float = -1.0
    theta: float = 0.775
    eps: float = 0.0
    ensemble: int = 8
    kinds: str = "E,M1"
    refinement_gate: float = 3.5
    # paths
    input: str = ""
    out: str = "out"


_FIELD_TYPES = {f.name: f.type for f in fields(RunConfig)}
_PARSERS = {"int": int, "float": float, "str": str, "bool": _bool}


def _parse_value(name, raw, lineno=None):
    ftype = _FIELD_TYPES[name]
    key = ftype if isinstance(ftype, str) else ftype.__name__
    try:
        return _PARSERS[key](raw)
    except ValueError:
        where = f" (line {lineno})" if lineno is not None else ""
        raise ConfigError(
            f"field '{name}'{where}: cannot parse {raw!r} as {key}"
        ) from None


def validate_config(cfg):
    """Range checks; every failure names the offending field."""
    def positive(name):
        if getattr(cfg, name) <= 0:
            raise ConfigError(f"field '{name}' must be positive, got "
                              f"{getattr(cfg, name)!r}")

    if cfg.mode not in MODES:
        raise ConfigError(
            f"field 'mode': unknown mode {cfg.mode!r}; choose from "
            + ", ".join(MODES)
        )
    for name in ("n_points", "length", "rank", "time_horizon", "dt",
                 "snapshot_stride", "smallness", "gauge_smallness",
                 "tol_coulomb", "tol_elliptic", "tol_mean", "tol_reconstruct",
                 "norm_cap", "cfl_cap", "picard_iterations", "ensemble",
                 "refinement_gate"):
        positive(name)
    if cfg.rank < 2:
        raise ConfigError("field 'rank' must be at least 2")
    if cfg.seed < 0:
        raise ConfigError("field 'seed' must be nonnegative")
    if cfg.amplitude < 0:
        raise ConfigError("field 'amplitude' must be nonnegative")
    if cfg.s <= 0:
        raise ConfigError("field 's' must be positive")
    for kind in cfg.kinds.split(","):
        if kind.strip() == "":
            raise ConfigError("field 'kinds' has an empty entry")
    return cfg


def parse_config(text):
    values = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ConfigError(f"line {lineno}: expected 'key = value', got "
                              f"{stripped!r}")
        key, _, raw = stripped.partition("=")
        key = key.strip()
        raw = raw.strip()
        if key not in _FIELD_TYPES:
            raise ConfigError(f"line {lineno}: unknown key '{key}'")
        if key in values:
            raise ConfigError(f"line {lineno}: duplicate key '{key}'")
        values[key] = _parse_value(key, raw, lineno)
    return validate_config(RunConfig(**values))


def load_config(path):
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_config(text)


def _format_value(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    return repr(v) if isinstance(v, float) else str(v)


def config_to_text(cfg):
    """Normalized form: declaration order, `key = value`, repr floats."""
    lines = [
        f"{f.name} = {_format_value(getattr(cfg, f.name))}"
        for f in fields(RunConfig)
    ]
    return "\n".join(lines) + "\n"


def save_config(cfg, path):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(config_to_text(cfg))


def config_to_dict(cfg):
    return {f.name: getattr(cfg, f.name) for f in fields(RunConfig)}
