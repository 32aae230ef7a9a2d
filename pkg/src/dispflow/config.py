"""Experiment configuration: a flat TOML document plus an ``[initial_data]`` table.

Example::

    target = "s2"
    model = "dispersive"
    n = 256
    L = 6.283185307179586
    t_end = 1.0
    a = 1.0
    b = 0.5

    [initial_data]
    family = "perturbed-circle"
    k = 1
    amp = 0.05
    mode = 3

Unknown keys are rejected with their line number.  ``preset`` fills in a
named experiment; explicit keys override it except where the preset pins a
value (the Fukumoto-Miyazaki preset pins the target and b = a/2).
"""

import math
import re
import sys
from dataclasses import asdict, dataclass, field

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .fields import Grid
from .geometry import TARGET_NAMES, get_target
from .initial_data import FAMILY_PARAMS
from .pde import FlowCoefficients
from .solver import MODELS, SolverConfig


class ParseError(ValueError):
    pass


class ValidationError(ValueError):
    pass


TOP_KEYS = {
    "preset",
    "target",
    "model",
    "n",
    "L",
    "t_end",
    "a",
    "b",
    "epsilon",
    "dt",
    "cfl",
    "projection",
    "projection_k",
    "diag_order",
    "snapshot_stride",
    "epsilon_schedule",
    "blowup_ceiling",
    "dealias",
    "track_E",
    "output_dir",
    "initial_data",
}

TWO_PI = 2.0 * math.pi

PRESETS = {
    "conservation-s2": {
        "target": "s2",
        "model": "dispersive",
        "n": 256,
        "L": TWO_PI,
        "t_end": 1.0,
        "a": 1.0,
        "b": 0.5,
        "epsilon": 0.0,
        "snapshot_stride": 500,
        "initial_data": {"family": "perturbed-circle", "k": 1, "amp": 0.05, "mode": 3},
    },
    "gauge-s6": {
        "target": "s6",
        "model": "dispersive",
        "n": 256,
        "L": TWO_PI,
        "t_end": 0.01,
        "a": 1.0,
        "b": 0.5,
        "epsilon": 0.0,
        "diag_order": 4,
        "snapshot_stride": 50,
        "initial_data": {"family": "random-analytic", "seed": 0},
    },
    "epsilon-continuation": {
        "target": "s2",
        "model": "dispersive",
        "n": 256,
        "L": TWO_PI,
        "t_end": 0.1,
        "a": 1.0,
        "b": 0.5,
        "epsilon_schedule": [1e-2, 1e-3, 1e-4],
        "snapshot_stride": 500,
        "initial_data": {"family": "perturbed-circle", "k": 1, "amp": 0.05, "mode": 3},
    },
    "fukumoto-miyazaki": {
        "target": "s2",
        "model": "fukumoto-miyazaki",
        "n": 256,
        "L": TWO_PI,
        "t_end": 0.1,
        "a": 1.0,
        "snapshot_stride": 500,
        "initial_data": {"family": "perturbed-circle", "k": 1, "amp": 0.05, "mode": 3},
    },
}


@dataclass(frozen=True)
class ExperimentConfig:
    target: str
    model: str
    n: int
    L: float
    t_end: float
    a: float
    b: float
    epsilon: float
    dt: object
    cfl: float
    projection: str
    projection_k: int
    diag_order: int
    snapshot_stride: int
    epsilon_schedule: tuple | None
    blowup_ceiling: float
    dealias: bool
    track_E: bool
    output_dir: str
    initial_family: str
    initial_params: dict = field(default_factory=dict)
    preset: str | None = None

    @property
    def grid(self):
        return Grid(self.n, self.L)

    @property
    def coefficients(self):
        return FlowCoefficients(self.a, self.b, self.epsilon)

    def solver_config(self):
        return SolverConfig(
            coefficients=self.coefficients,
            grid=self.grid,
            t_end=self.t_end,
            dt=self.dt,
            model=self.model,
            projection=self.projection,
            projection_k=self.projection_k,
            diag_order=self.diag_order,
            snapshot_stride=self.snapshot_stride,
            epsilon_schedule=self.epsilon_schedule,
            cfl=self.cfl,
            blowup_ceiling=self.blowup_ceiling,
            dealias=self.dealias,
        )

    def to_dict(self):
        d = asdict(self)
        d["epsilon_schedule"] = list(self.epsilon_schedule) if self.epsilon_schedule else None
        return d


def _line_of(text, key):
    pat = re.compile(rf"^[ \t]*{re.escape(key)}[ \t]*=", re.M)
    m = pat.search(text)
    return text.count("\n", 0, m.start()) + 1 if m else None


def _key_error(text, key, msg):
    line = _line_of(text, key) if text else None
    where = f"line {line}: " if line else ""
    return ParseError(f"{where}{msg}")


def _number(raw, key, text, kind=float):
    v = raw[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise _key_error(text, key, f"key {key!r} must be a number, got {v!r}")
    if kind is int:
        if isinstance(v, float) and not v.is_integer():
            raise _key_error(text, key, f"key {key!r} must be an integer, got {v!r}")
        return int(v)
    return float(v)


def parse_config(text="", overrides=None):
    """Parse a TOML document (optionally patched by ``overrides``) into an ExperimentConfig."""
    try:
        doc = tomllib.loads(text) if text else {}
    except tomllib.TOMLDecodeError as exc:
        raise ParseError(f"malformed config: {exc}") from None
    for key in doc:
        if key not in TOP_KEYS:
            raise _key_error(text, key, f"unknown key {key!r}")
    if "initial_data" in doc and not isinstance(doc["initial_data"], dict):
        raise _key_error(text, "initial_data", "initial_data must be a table")
    doc = dict(doc)
    for key, value in (overrides or {}).items():
        if key not in TOP_KEYS:
            raise ParseError(f"unknown key {key!r}")
        if value is not None:
            doc[key] = value
    return _resolve(doc, text)


def _resolve(doc, text=""):
    preset = doc.get("preset")
    raw = {}
    if preset is not None:
        if preset not in PRESETS:
            raise _key_error(text, "preset", f"unknown preset {preset!r}; expected one of {sorted(PRESETS)}")
        raw.update(PRESETS[preset])
        raw["initial_data"] = dict(PRESETS[preset]["initial_data"])
    for k, v in doc.items():
        if k == "initial_data" and "initial_data" in raw and "family" not in v:
            raw["initial_data"] = {**raw["initial_data"], **v}
        else:
            raw[k] = v

    for key in ("target", "model", "n", "L", "t_end"):
        if key not in raw:
            raise ParseError(f"missing required key {key!r}")
    target = raw["target"]
    if target not in TARGET_NAMES:
        raise _key_error(text, "target", f"unknown target {target!r}; expected one of {sorted(TARGET_NAMES)}")
    model = raw["model"]
    if model not in MODELS:
        raise _key_error(text, "model", f"unknown model {model!r}; expected one of {list(MODELS)}")

    n = _number(raw, "n", text, int)
    L = _number(raw, "L", text)
    t_end = _number(raw, "t_end", text)
    default_a = 0.0 if model == "darios" else 1.0
    a = _number(raw, "a", text) if "a" in raw else default_a
    if model == "darios":
        default_b = 0.0
    elif model == "fukumoto-miyazaki":
        default_b = a / 2.0
    else:
        default_b = 0.0
    b = _number(raw, "b", text) if "b" in raw else default_b
    epsilon = _number(raw, "epsilon", text) if "epsilon" in raw else 0.0
    dt = raw.get("dt", "auto")
    if dt != "auto":
        dt = _number(raw, "dt", text)
    cfl = _number(raw, "cfl", text) if "cfl" in raw else 0.5
    projection = raw.get("projection", "every_step")
    projection_k = _number(raw, "projection_k", text, int) if "projection_k" in raw else 4
    m = re.fullmatch(r"every_k_steps(?:\((\d+)\)|:(\d+))", str(projection))
    if m:
        projection, projection_k = "every_k_steps", int(m.group(1) or m.group(2))
    diag_order = _number(raw, "diag_order", text, int) if "diag_order" in raw else 4
    stride = _number(raw, "snapshot_stride", text, int) if "snapshot_stride" in raw else 100
    sched = raw.get("epsilon_schedule")
    if sched is not None:
        if isinstance(sched, str):
            sched = [float(s) for s in sched.split(",") if s.strip()]
        sched = tuple(float(s) for s in sched)
    ceiling = _number(raw, "blowup_ceiling", text) if "blowup_ceiling" in raw else 1e3
    dealias = bool(raw.get("dealias", True))
    track_E = raw.get("track_E")
    output_dir = str(raw.get("output_dir", "dispflow-out"))
    init = dict(raw.get("initial_data", {"family": "great-circle"} if target != "t2-clifford" else {"family": "torus-winding"}))
    family = init.pop("family", None)
    if family not in FAMILY_PARAMS:
        raise _key_error(text, "family", f"unknown initial-data family {family!r}; expected one of {sorted(FAMILY_PARAMS)}")
    extra = set(init) - FAMILY_PARAMS[family]
    if extra:
        raise _key_error(text, sorted(extra)[0], f"family {family!r} does not take parameters {sorted(extra)}")

    # ---- validation
    kahler = get_target(target).is_kahler
    if model in ("darios", "fukumoto-miyazaki") and target != "s2":
        raise ValidationError(f"model {model!r} is defined on the s2 target only")
    if model in ("darios", "fukumoto-miyazaki") and (epsilon > 0 or sched):
        raise ValidationError(f"model {model!r} has no parabolic regularisation; epsilon must be 0")
    if model == "fukumoto-miyazaki" or preset == "fukumoto-miyazaki":
        if target != "s2":
            raise ValidationError("the Fukumoto-Miyazaki preset requires the s2 target")
        if "b" in raw and b != a / 2.0:
            raise ValidationError(f"the Fukumoto-Miyazaki integrability condition forces b = a/2 = {a / 2.0}, got b = {b}")
        b = a / 2.0
    if model == "dispersive" and a == 0.0 and epsilon == 0.0 and not sched:
        raise ValidationError("a = 0 with epsilon = 0 is outside the theory: the dispersive flow needs a != 0 (use epsilon > 0 for the Schroedinger-map limit)")
    if not 0.0 <= epsilon < 1.0:
        raise ValidationError(f"epsilon must lie in [0, 1), got {epsilon}")
    if sched is not None:
        if not sched or any(not 0.0 < e < 1.0 for e in sched):
            raise ValidationError("epsilon_schedule entries must lie in (0, 1)")
        if any(y >= x for x, y in zip(sched, sched[1:])):
            raise ValidationError("epsilon_schedule must be strictly decreasing")
    if not kahler:
        if track_E:
            raise ValidationError(f"track_E needs a constant-curvature Kaehler surface target; {target} is not Kaehler")
        if diag_order < 4:
            raise ValidationError(f"diag_order = {diag_order} < 4 is only admissible on Kaehler targets; {target} needs m >= 4")
    elif diag_order < 2:
        raise ValidationError(f"diag_order must be >= 2, got {diag_order}")
    if track_E is None:
        track_E = kahler
    if n < 16 or n & (n - 1):
        raise ValidationError(f"n must be a power of two >= 16, got {n}")
    if not L > 0:
        raise ValidationError(f"L must be positive, got {L}")
    if not t_end > 0:
        raise ValidationError(f"t_end must be positive, got {t_end}")
    if dt != "auto" and not dt > 0:
        raise ValidationError(f"dt must be positive or 'auto', got {dt}")
    if not cfl > 0:
        raise ValidationError(f"cfl must be positive, got {cfl}")
    if projection not in ("every_step", "every_k_steps", "none"):
        raise ValidationError(f"projection must be every_step, every_k_steps(k) or none, got {projection!r}")
    if projection_k < 1:
        raise ValidationError("projection_k must be >= 1")
    if stride < 1:
        raise ValidationError("snapshot_stride must be >= 1")
    if not ceiling > 1:
        raise ValidationError("blowup_ceiling must exceed 1")

    return ExperimentConfig(
        target=target,
        model=model,
        n=n,
        L=L,
        t_end=t_end,
        a=a,
        b=b,
        epsilon=epsilon,
        dt=dt,
        cfl=cfl,
        projection=projection,
        projection_k=projection_k,
        diag_order=diag_order,
        snapshot_stride=stride,
        epsilon_schedule=sched,
        blowup_ceiling=ceiling,
        dealias=dealias,
        track_E=bool(track_E),
        output_dir=output_dir,
        initial_family=family,
        initial_params=init,
        preset=preset,
    )
