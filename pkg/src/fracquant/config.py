"""Run configuration: JSON parsing with full error collection, defaults, round-trip."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, fields

from .errors import ConfigError
from .measures import MeasureModel, measure_from_dict

COMMANDS = ("spectrum", "qdim", "partition", "coarse", "quantize", "closedform", "verify")

# every default used by the command line lives here
DEFAULTS = {
    "seed": 0,               # seed of every stochastic step
    "n_max": 12,             # finest dyadic level
    "n_min": None,           # first regression level; None means max(1, n_max // 3)
    "q_min": 0.0,            # q grid start
    "q_max": 1.5,            # q grid end
    "q_step": 0.01,          # q grid step
    "tol": 1e-10,            # bisection tolerance on q
    "samples": 200_000,      # Monte Carlo samples per error evaluation
    "mc_samples": 1_000_000,  # Monte Carlo samples behind approximate mass tables
    "r_grid": [1.0],         # orders r
    "t_points": 12,          # thresholds in a default t grid
    "alpha_points": 20,      # points in the default alpha grid
    "lloyd_iterations": 5,   # Lloyd iterations per codebook on the error curve
    "method": "auto",        # spectrum estimator
    "threads": 1,            # worker threads for nearest-neighbour queries
}

_LIST_KEYS = ("q_grid", "r_grid", "t_grid", "alpha_grid", "n_grid")
_INT_KEYS = ("seed", "n_max", "n_min", "samples", "mc_samples", "t_points", "alpha_points",
             "lloyd_iterations", "threads")
_FLOAT_KEYS = ("q_min", "q_max", "q_step", "tol")


@dataclass
class RunConfig:
    measure: dict
    command: str
    seed: int = DEFAULTS["seed"]
    n_max: int = DEFAULTS["n_max"]
    n_min: int | None = DEFAULTS["n_min"]
    q_grid: list[float] | None = None
    q_min: float = DEFAULTS["q_min"]
    q_max: float = DEFAULTS["q_max"]
    q_step: float = DEFAULTS["q_step"]
    tol: float = DEFAULTS["tol"]
    samples: int = DEFAULTS["samples"]
    mc_samples: int = DEFAULTS["mc_samples"]
    r_grid: list[float] = field(default_factory=lambda: list(DEFAULTS["r_grid"]))
    t_grid: list[float] | None = None
    t_points: int = DEFAULTS["t_points"]
    alpha_grid: list[float] | None = None
    alpha_points: int = DEFAULTS["alpha_points"]
    n_grid: list[int] | None = None
    lloyd_iterations: int = DEFAULTS["lloyd_iterations"]
    method: str = DEFAULTS["method"]
    threads: int = DEFAULTS["threads"]
    output: str | None = None

    def q_values(self) -> list[float]:
        if self.q_grid is not None:
            return sorted(set(self.q_grid) | {0.0, 1.0})
        count = int(math.floor((self.q_max - self.q_min) / self.q_step + 1e-9)) + 1
        grid = {round(self.q_min + i * self.q_step, 10) for i in range(count)}
        return sorted(grid | {0.0, 1.0})

    def regression_n_min(self) -> int:
        return self.n_min if self.n_min is not None else max(1, self.n_max // 3)

    def model(self) -> MeasureModel:
        return build_model(self.measure, self.mc_samples, self.seed)

    def to_dict(self) -> dict:
        return asdict(self)


def build_model(spec: dict, mc_samples: int = DEFAULTS["mc_samples"],
                seed: int | None = None) -> MeasureModel:
    """Model from a measure spec; missing sample budgets and seeds come from the run."""
    spec = _with_samples(dict(spec), mc_samples)
    if seed is not None:
        spec.setdefault("seed", seed)
    return measure_from_dict(spec)


def _with_samples(spec, mc_samples):
    if spec.get("kind") in ("self_similar", "inhomogeneous_self_similar") and "samples" not in spec:
        spec["samples"] = mc_samples
    if spec.get("kind") == "mixture" and isinstance(spec.get("components"), list):
        spec["components"] = [
            dict(c, measure=_with_samples(dict(c["measure"]), mc_samples))
            if isinstance(c, dict) and isinstance(c.get("measure"), dict) else c
            for c in spec["components"]]
    return spec


def _is_num(x) -> bool:
    return isinstance(x, (int, float)) and not isinstance(x, bool) and math.isfinite(x)


def parse_config(text: str) -> RunConfig:
    """Validate a JSON config; every violation is reported in one :class:`ConfigError`.

    Examples
    --------
    >>> cfg = parse_config('{"measure": {"kind": "uniform_density", "dimension": 1},'
    ...                    ' "command": "spectrum", "q_grid": [0, 0.5, 1]}')
    >>> cfg.command
    'spectrum'
    """
    try:
        raw = json.loads(text)
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise ConfigError([f"malformed JSON: {exc}"]) from exc
    if not isinstance(raw, dict):
        raise ConfigError(["config must be a JSON object"])
    errors: list[str] = []
    known = {f.name for f in fields(RunConfig)}
    for key in raw:
        if key not in known:
            errors.append(f"unknown key {key!r}")
    command = raw.get("command")
    if command not in COMMANDS:
        errors.append(f"command must be one of {', '.join(COMMANDS)}, got {command!r}")
    measure = raw.get("measure")
    if not isinstance(measure, dict):
        errors.append("measure must be an object")
    else:
        try:
            build_model(measure, raw.get("mc_samples", DEFAULTS["mc_samples"])
                        if _is_num(raw.get("mc_samples")) else DEFAULTS["mc_samples"])
        except ConfigError as exc:
            errors.extend(exc.errors)
        except (ValueError, TypeError) as exc:
            errors.append(f"measure: {exc}")
    values = {}
    for key in _INT_KEYS:
        if key in raw:
            v = raw[key]
            if v is None and key == "n_min":
                values[key] = None
            elif not (_is_num(v) and float(v).is_integer()):
                errors.append(f"{key} must be an integer, got {v!r}")
            else:
                values[key] = int(v)
    for key in _FLOAT_KEYS:
        if key in raw:
            v = raw[key]
            if not _is_num(v):
                errors.append(f"{key} must be a number, got {v!r}")
            else:
                values[key] = float(v)
    for key in _LIST_KEYS:
        if key in raw and raw[key] is not None:
            v = raw[key]
            if not isinstance(v, list) or not v or not all(_is_num(x) for x in v):
                errors.append(f"{key} must be a non-empty list of numbers")
                continue
            if key == "n_grid":
                if not all(float(x).is_integer() and x >= 1 for x in v):
                    errors.append("n_grid entries must be positive integers")
                    continue
                values[key] = [int(x) for x in v]
            else:
                values[key] = [float(x) for x in v]
    if "method" in raw:
        if raw["method"] not in ("auto", "last_level", "regression", "limsup", "components"):
            errors.append(f"unknown spectrum method {raw['method']!r}")
        else:
            values["method"] = raw["method"]
    if "output" in raw:
        if raw["output"] is not None and not isinstance(raw["output"], str):
            errors.append("output must be a path string")
        else:
            values["output"] = raw["output"]
    errors.extend(_check_ranges(values))
    if errors:
        raise ConfigError(errors)
    return RunConfig(measure=measure, command=command, **values)


def _check_ranges(v: dict) -> list[str]:
    errors = []
    n_max = v.get("n_max", DEFAULTS["n_max"])
    n_min = v.get("n_min")
    if n_max < 1:
        errors.append(f"n_max must be >= 1, got {n_max}")
    if n_min is not None and not 1 <= n_min < n_max:
        errors.append(f"need 1 <= n_min < n_max, got n_min={n_min}, n_max={n_max}")
    if v.get("q_step", 1.0) <= 0:
        errors.append("q_step must be positive")
    if v.get("q_min", 0.0) < 0 or v.get("q_max", 1.5) < v.get("q_min", 0.0):
        errors.append("need 0 <= q_min <= q_max")
    if "q_grid" in v and any(q < 0 for q in v["q_grid"]):
        errors.append("q_grid entries must be >= 0")
    if "r_grid" in v and any(r <= 0 for r in v["r_grid"]):
        errors.append("r_grid entries must be positive")
    if "t_grid" in v and any(not 0 < t < 1 for t in v["t_grid"]):
        errors.append("t_grid entries must lie in (0, 1)")
    if "alpha_grid" in v and any(a <= 0 for a in v["alpha_grid"]):
        errors.append("alpha_grid entries must be positive")
    if v.get("tol", 1.0) <= 0:
        errors.append("tol must be positive")
    for key in ("samples", "mc_samples", "t_points", "alpha_points", "threads"):
        if key in v and v[key] < 1:
            errors.append(f"{key} must be >= 1")
    if v.get("lloyd_iterations", 0) < 0:
        errors.append("lloyd_iterations must be >= 0")
    if v.get("seed", 0) < 0:
        errors.append("seed must be >= 0")
    return errors


def emit_config(config: RunConfig) -> str:
    """Canonical JSON text; ``parse_config(emit_config(c)) == c``."""
    return json.dumps(config.to_dict(), sort_keys=True, ensure_ascii=False)
