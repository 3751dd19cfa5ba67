"""
Plant models, sampling schedules and the cyber-physical split of a sampled-data loop.

Model files are single JSON documents::

    {"name": "...", "n": 2, "A": [[...]], "diffusion": [[[...]]],
     "B_bar": [[...]]  |  "B_hat": [[...]], "K_hat": [[...]]?,
     "nonlinearity": {"type": "planar_sin"}?, "x0": [...]?}
"""
import dataclasses
import json
import logging
import math
from dataclasses import dataclass, field
from enum import Enum, unique
from pathlib import Path
from typing import Any, Callable, ClassVar, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from tjpy_sampled_control.errors import CallbackError, DomainError, FormatError, ValidationError
from tjpy_sampled_control.files import assert_path_is_file, write_text_atomically
from tjpy_sampled_control.numerics import spectral_norm

_logger = logging.getLogger(__name__)

_MODEL_KEYS = {"name", "n", "A", "diffusion", "B_bar", "B_hat", "K_hat", "nonlinearity", "x0"}
_REQUIRED_MODEL_KEYS = ("name", "n", "A", "diffusion")

PLANAR_A = np.array([[0.25, 1.0], [0.0, 0.0]])
PLANAR_B_HAT = np.array([[0.0], [1.0]])
ENVELOPE_E1 = np.array([[0.25, 0.0], [1.0, 0.0]])


@dataclass(frozen=True, eq=False)
class LinearSampledModel:
    """
    dx = [A x + B̄ x(t_*)] dt + Σ_j G_j x dB_j with the state x(t_*) held since the last sampling instant.

    Either `B_bar` is given directly, or the input map `B_hat` with an optional gain `K_hat`
    (B̄ = B̂K̂). Without a gain the model is in design mode.
    """
    name: str
    A: np.ndarray
    diffusion: Tuple[np.ndarray, ...] = ()
    B_bar: Optional[np.ndarray] = None
    B_hat: Optional[np.ndarray] = None
    K_hat: Optional[np.ndarray] = None
    x0: Optional[np.ndarray] = None

    def __post_init__(self):
        a = _matrix(self.A, "A")
        n = a.shape[0]
        if a.shape != (n, n):
            raise ValidationError(f"must be square but has shape {a.shape}", field_path="A")
        object.__setattr__(self, "A", a)
        diffusion = tuple(_matrix(g, f"diffusion[{j}]") for j, g in enumerate(self.diffusion))
        for j, g in enumerate(diffusion):
            if g.shape != (n, n):
                raise ValidationError(f"must be {n}x{n} like A but has shape {g.shape}", field_path=f"diffusion[{j}]")
        object.__setattr__(self, "diffusion", diffusion)

        if (self.B_bar is None) == (self.B_hat is None):
            raise ValidationError("exactly one of B_bar or B_hat must be given", field_path="B_bar")
        if self.B_bar is not None:
            if self.K_hat is not None:
                raise ValidationError("K_hat requires B_hat instead of B_bar", field_path="K_hat")
            b_bar = _matrix(self.B_bar, "B_bar")
            if b_bar.shape != (n, n):
                raise ValidationError(f"must be {n}x{n} but has shape {b_bar.shape}", field_path="B_bar")
            object.__setattr__(self, "B_bar", b_bar)
        else:
            b_hat = _matrix(self.B_hat, "B_hat")
            if b_hat.shape[0] != n:
                raise ValidationError(f"must have {n} rows but has shape {b_hat.shape}", field_path="B_hat")
            object.__setattr__(self, "B_hat", b_hat)
            if self.K_hat is not None:
                k_hat = _matrix(self.K_hat, "K_hat")
                if k_hat.shape != (b_hat.shape[1], n):
                    raise ValidationError(f"must be {b_hat.shape[1]}x{n} but has shape {k_hat.shape}",
                                          field_path="K_hat")
                object.__setattr__(self, "K_hat", k_hat)
        if self.x0 is not None:
            object.__setattr__(self, "x0", _initial_state(self.x0, n))

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def m(self) -> int:
        """number of Brownian channels"""
        return len(self.diffusion)

    @property
    def design_mode(self) -> bool:
        return self.B_hat is not None and self.K_hat is None

    @property
    def is_deterministic(self) -> bool:
        return all(not np.any(g) for g in self.diffusion)

    def closed_feedback(self) -> np.ndarray:
        """B̄, either given or B̂K̂."""
        if self.B_bar is not None:
            return self.B_bar
        if self.K_hat is None:
            raise ValidationError(f"model {self.name} has no feedback gain yet", field_path="K_hat")
        return self.B_hat @ self.K_hat

    def closed_loop_drift(self) -> np.ndarray:
        """F = A + B̄, the drift seen when the held state equals the current one."""
        return self.A + self.closed_feedback()

    def with_gain(self, gain: np.ndarray) -> 'LinearSampledModel':
        if self.B_hat is None:
            raise ValidationError(f"model {self.name} has no input map to attach a gain to", field_path="B_hat")
        return dataclasses.replace(self, K_hat=np.array(gain, dtype=float))


@dataclass(frozen=True, eq=False)
class NonlinearPlanarModel:
    """
    The planar plant ẋ₁ = x₂ + ¼(x₁ + x₁ sin(u x₂)), ẋ₂ = u + x₁ sin(u x₂) under u = K̂ x(t_*).

    Written as Āx + B̂u + φ(x, u) the nonlinearity obeys |φ(x, u)| ≤ |E₁x| for every u.
    """
    name: str
    K_hat: Optional[np.ndarray] = None
    x0: Optional[np.ndarray] = None
    A: np.ndarray = field(default_factory=lambda: PLANAR_A.copy())
    B_hat: np.ndarray = field(default_factory=lambda: PLANAR_B_HAT.copy())
    E1: np.ndarray = field(default_factory=lambda: ENVELOPE_E1.copy())

    def __post_init__(self):
        if self.K_hat is not None:
            k_hat = _matrix(self.K_hat, "K_hat")
            if k_hat.shape != (1, 2):
                raise ValidationError(f"must be a 1x2 row but has shape {k_hat.shape}", field_path="K_hat")
            object.__setattr__(self, "K_hat", k_hat)
        if self.x0 is not None:
            object.__setattr__(self, "x0", _initial_state(self.x0, 2))

    n: ClassVar[int] = 2
    m: ClassVar[int] = 0
    diffusion: ClassVar[Tuple[np.ndarray, ...]] = ()
    is_deterministic: ClassVar[bool] = True

    @property
    def design_mode(self) -> bool:
        return self.K_hat is None

    def phi(self, x: np.ndarray, u: Union[float, np.ndarray]) -> np.ndarray:
        """φ(x, u) = [¼ x₁ sin(u x₂), x₁ sin(u x₂)], broadcasting over leading axes of `x`."""
        x = np.asarray(x, dtype=float)
        coupling = x[..., 0] * np.sin(np.asarray(u) * x[..., 1])
        return np.stack([0.25 * coupling, coupling], axis=-1)

    def drift(self, x: np.ndarray, u: Union[float, np.ndarray]) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        u = np.asarray(u, dtype=float)
        linear = np.stack([0.25 * x[..., 0] + x[..., 1], u * np.ones_like(x[..., 0])], axis=-1)
        return linear + self.phi(x, u)

    def closed_feedback(self) -> np.ndarray:
        if self.K_hat is None:
            raise ValidationError(f"model {self.name} has no feedback gain yet", field_path="K_hat")
        return self.B_hat @ self.K_hat

    def with_gain(self, gain: np.ndarray) -> 'NonlinearPlanarModel':
        return dataclasses.replace(self, K_hat=np.array(gain, dtype=float))


Model = Union[LinearSampledModel, NonlinearPlanarModel]


@unique
class ScheduleKind(Enum):
    PERIODIC = "periodic"
    UNIFORM_RANDOM = "uniform"
    EXPLICIT = "explicit"


@dataclass(frozen=True)
class SamplingSchedule:
    kind: ScheduleKind
    dt_lo: float
    dt_hi: float
    instants: Tuple[float, ...] = ()

    @classmethod
    def periodic(cls, dt: float) -> 'SamplingSchedule':
        _check_positive(dt, "sampling period")
        return cls(ScheduleKind.PERIODIC, dt, dt)

    @classmethod
    def uniform_random(cls, dt_lo: float, dt_hi: float) -> 'SamplingSchedule':
        _check_positive(dt_lo, "lower sampling interval")
        if dt_hi < dt_lo:
            raise ValidationError(f"upper interval {dt_hi} is below the lower interval {dt_lo}", field_path="schedule")
        return cls(ScheduleKind.UNIFORM_RANDOM, dt_lo, dt_hi)

    @classmethod
    def explicit(cls, instants: Sequence[float]) -> 'SamplingSchedule':
        values = [float(t) for t in instants]
        if len(values) == 0 or values[0] < 0:
            raise ValidationError("explicit instants must be non-negative and non-empty", field_path="schedule")
        if values[0] > 0:
            values.insert(0, 0.0)
        gaps = np.diff(values)
        if len(gaps) == 0 or np.any(gaps <= 0):
            raise ValidationError(f"explicit instants must be strictly increasing from t0 = 0 but are {values}",
                                  field_path="schedule")
        return cls(ScheduleKind.EXPLICIT, float(np.min(gaps)), float(np.max(gaps)), tuple(values))

    @property
    def underline_dt(self) -> float:
        return self.dt_lo

    @property
    def overline_dt(self) -> float:
        return self.dt_hi

    def describe(self) -> str:
        if self.kind is ScheduleKind.PERIODIC:
            return f"periodic:{self.dt_lo!r}"
        if self.kind is ScheduleKind.UNIFORM_RANDOM:
            return f"uniform:{self.dt_lo!r},{self.dt_hi!r}"
        return "explicit:" + ",".join(repr(t) for t in self.instants)


def parse_schedule(text: str) -> SamplingSchedule:
    """Parses ``periodic:DT``, ``uniform:LO,HI`` or ``explicit:T1,T2,...``."""
    kind, _, arguments = text.partition(":")
    try:
        values = [float(v) for v in arguments.split(",") if v.strip() != ""]
    except ValueError:
        raise FormatError(f"schedule '{text}' contains a non-numeric value")
    if kind == ScheduleKind.PERIODIC.value and len(values) == 1:
        return SamplingSchedule.periodic(values[0])
    if kind == ScheduleKind.UNIFORM_RANDOM.value and len(values) == 2:
        return SamplingSchedule.uniform_random(values[0], values[1])
    if kind == ScheduleKind.EXPLICIT.value and len(values) >= 1:
        return SamplingSchedule.explicit(values)
    raise FormatError(f"schedule '{text}' is not one of periodic:DT, uniform:LO,HI or explicit:T1,T2,...")


def schedule_instants(schedule: SamplingSchedule,
                      horizon: float,
                      rng_stream: Optional[np.random.Generator] = None) -> np.ndarray:
    """
    Sampling instants t_0 = 0 < t_1 < ... within [0, horizon].

    Periodic instants are computed as k·Δt rather than accumulated, so they carry no drift.
    """
    if not horizon > 0:
        raise DomainError(f"horizon must be positive but is {horizon}")
    if schedule.kind is ScheduleKind.PERIODIC:
        count = int(math.floor(horizon / schedule.dt_lo * (1 + 1e-12))) + 1
        instants = np.arange(count) * schedule.dt_lo
        return instants[instants <= horizon]
    if schedule.kind is ScheduleKind.UNIFORM_RANDOM:
        if rng_stream is None:
            raise DomainError("a uniform_random schedule needs a seeded generator")
        instants_list: List[float] = [0.0]
        while True:
            next_instant = instants_list[-1] + float(rng_stream.uniform(schedule.dt_lo, schedule.dt_hi))
            if next_instant > horizon:
                break
            instants_list.append(next_instant)
        return np.array(instants_list)
    instants = np.array([t for t in schedule.instants if t <= horizon])
    if horizon - instants[-1] > schedule.overline_dt:
        raise DomainError(f"explicit schedule ends at {instants[-1]} which is more than one sampling interval "
                          f"before the horizon {horizon}")
    return instants


@dataclass(frozen=True)
class Segment:
    """History since the previous impulse on the simulation grid. The last row is the left limit at t_k⁻."""
    times: np.ndarray
    x: np.ndarray
    y: np.ndarray


@dataclass(frozen=True)
class GeneralSiDE:
    """
    Stochastic impulsive system in canonical form::

        dx = f(x, y, t) dt + g(x, y, t) dB
        dy = f̃(x, y, t) dt + g̃(x, y, t) dB      between impulses
        y(t_k) = y(t_k⁻) + h̃_f(segment) + h̄_g(segment) ξ̄(k)

    g and g̃ return n×m and q×m matrices driven by the same m Brownian channels, h̄_g returns a q×n matrix
    multiplying a standard Gaussian ξ̄(k) ∈ R^n (only drawn when `impulse_noise` is set).
    """
    n: int
    q: int
    m: int
    f: Callable[[np.ndarray, np.ndarray, float], np.ndarray]
    g: Callable[[np.ndarray, np.ndarray, float], np.ndarray]
    f_tilde: Callable[[np.ndarray, np.ndarray, float], np.ndarray]
    g_tilde: Callable[[np.ndarray, np.ndarray, float], np.ndarray]
    h_f: Callable[[Segment], np.ndarray]
    h_g: Optional[Callable[[Segment], np.ndarray]] = None
    impulse_noise: bool = False
    x0: Optional[np.ndarray] = None
    y0: Optional[np.ndarray] = None

    def check_origin(self, *, tol: float = 1e-12):
        """Drift, diffusion and the deterministic jump map must all vanish at the trivial solution."""
        zero_x = np.zeros(self.n)
        zero_y = np.zeros(self.q)
        checks = {
            "f": lambda: self.f(zero_x, zero_y, 0.0),
            "g": lambda: self.g(zero_x, zero_y, 0.0),
            "f_tilde": lambda: self.f_tilde(zero_x, zero_y, 0.0),
            "g_tilde": lambda: self.g_tilde(zero_x, zero_y, 0.0),
            "h_f": lambda: self.h_f(Segment(np.zeros(1), zero_x[None, :], zero_y[None, :])),
        }
        for name, evaluate in checks.items():
            value = np.asarray(call_callback(evaluate, name, 0.0), dtype=float)
            if np.any(np.abs(value) > tol):
                raise ValidationError(f"callback does not vanish at the origin (max |value| = "
                                      f"{np.max(np.abs(value)):.3g})", field_path=name)


def call_callback(evaluate: Callable[[], Any], name: str, t: float) -> Any:
    try:
        value = evaluate()
    except Exception as ex:
        raise CallbackError(f"callback {name} failed: {ex!r}", t=t) from ex
    array = np.asarray(value, dtype=float)
    if not np.all(np.isfinite(array)):
        raise CallbackError(f"callback {name} returned non-finite values", t=t)
    return array


@dataclass(frozen=True)
class CpsForm:
    """
    Physical state x and cyber state y = x − x(t_*) of a sampled-data loop.

    Both blocks share drift f̄(x) + B̄(x − y) and diffusion; at each sampling instant y is reset to 0.
    """
    A: np.ndarray
    B_bar: np.ndarray
    diffusion: Tuple[np.ndarray, ...]
    x0: np.ndarray
    y0: np.ndarray

    def physical_drift(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        return self.A @ x + self.B_bar @ (x - y)

    def cyber_drift(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        return self.physical_drift(x, y)

    def diffusion_matrix(self, x: np.ndarray) -> np.ndarray:
        """n×m matrix whose column j is G_j x."""
        if len(self.diffusion) == 0:
            return np.zeros((len(x), 0))
        return np.stack([g @ x for g in self.diffusion], axis=1)

    def jump(self, y_before: np.ndarray) -> np.ndarray:
        """Increment applied to y at t_k, it returns −y(t_k⁻) so that y(t_k) = 0."""
        return -np.asarray(y_before, dtype=float)

    def as_side(self) -> GeneralSiDE:
        n = self.A.shape[0]
        return GeneralSiDE(
            n=n, q=n, m=len(self.diffusion),
            f=lambda x, y, t: self.physical_drift(x, y),
            g=lambda x, y, t: self.diffusion_matrix(x),
            f_tilde=lambda x, y, t: self.cyber_drift(x, y),
            g_tilde=lambda x, y, t: self.diffusion_matrix(x),
            h_f=lambda segment: self.jump(segment.y[-1]),
            x0=self.x0, y0=self.y0,
        )


def to_cps_form(model: LinearSampledModel, *, x0: Optional[np.ndarray] = None) -> CpsForm:
    b_bar = model.closed_feedback()
    initial = x0 if x0 is not None else model.x0
    initial_state = np.zeros(model.n) if initial is None else _initial_state(initial, model.n)
    return CpsForm(A=model.A, B_bar=b_bar, diffusion=model.diffusion,
                   x0=initial_state, y0=np.zeros(model.n))


@dataclass(frozen=True)
class AssumptionReport:
    """
    Empirical Lipschitz and linear-growth ratios of the callbacks over random points of a box.

    Sampling can only refute the assumptions, never prove them, hence `heuristic` is always set.
    """
    growth_ratio: Dict[str, float]
    lipschitz_ratio: Dict[str, float]
    violations: Tuple[str, ...]
    n_samples: int
    box: Tuple[float, float]
    heuristic: bool = True

    @property
    def ok(self) -> bool:
        return len(self.violations) == 0


def assumption_check(side: GeneralSiDE,
                     sample_box: Tuple[float, float],
                     grid: int = 1000,
                     *,
                     growth_constant: Optional[float] = None,
                     lipschitz_constant: Optional[float] = None,
                     seed: int = 0) -> AssumptionReport:
    """
    Estimates sup |c(x, y)| / (|x| ∨ |y|) and sup |c(a) − c(b)| / |a − b| for c ∈ {f, g, f̃, g̃}
    on `grid` random points of the box.

    Ratios above the supplied constants are reported as violations.
    """
    lo, hi = sample_box
    if not lo < hi:
        raise DomainError(f"sample box must satisfy lo < hi but is {sample_box}")
    rng = np.random.default_rng(seed)
    xs = rng.uniform(lo, hi, size=(grid, side.n))
    ys = rng.uniform(lo, hi, size=(grid, side.q))
    callbacks = {"f": side.f, "g": side.g, "f_tilde": side.f_tilde, "g_tilde": side.g_tilde}

    growth: Dict[str, float] = {}
    lipschitz: Dict[str, float] = {}
    violations: List[str] = []
    for name, callback in callbacks.items():
        values = [np.ravel(call_callback(lambda: callback(x, y, 0.0), name, 0.0)) for x, y in zip(xs, ys)]
        magnitudes = np.array([np.linalg.norm(v) for v in values])
        radii = np.maximum(np.linalg.norm(xs, axis=1), np.linalg.norm(ys, axis=1))
        usable = radii > 0
        growth[name] = float(np.max(magnitudes[usable] / radii[usable])) if np.any(usable) else 0.0
        differences = np.array([np.linalg.norm(values[i] - values[i + 1]) for i in range(grid - 1)])
        distances = np.linalg.norm(np.hstack([np.diff(xs, axis=0), np.diff(ys, axis=0)]), axis=1)
        lipschitz[name] = float(np.max(differences / distances)) if grid > 1 else 0.0
        if growth_constant is not None and growth[name] > growth_constant:
            violations.append(f"{name}: growth ratio {growth[name]:.4g} exceeds {growth_constant}")
        if lipschitz_constant is not None and lipschitz[name] > lipschitz_constant:
            violations.append(f"{name}: Lipschitz ratio {lipschitz[name]:.4g} exceeds {lipschitz_constant}")
    _logger.debug(f"assumption check on box {sample_box} with {grid} samples: {len(violations)} violations")
    return AssumptionReport(growth, lipschitz, tuple(violations), grid, (float(lo), float(hi)))


def linear_growth_bound(model: LinearSampledModel) -> float:
    """|A| + |B̄|, a growth constant for the closed-loop linear drift."""
    return spectral_norm(model.A) + spectral_norm(model.closed_feedback())


def load_model(path: Path) -> Model:
    assert_path_is_file(path)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as ex:
        raise FormatError(f"model file {str(path)} is not valid JSON: {ex}")
    model = model_from_dict(data)
    _logger.debug(f"loaded model {model.name} (n={model.n}) from {str(path)}")
    return model


def model_from_dict(data: Any) -> Model:
    if not isinstance(data, dict):
        raise FormatError("a model document must be a JSON object")
    unknown = set(data) - _MODEL_KEYS
    if unknown:
        raise FormatError(f"unknown model keys: {sorted(unknown)}")
    if "nonlinearity" in data:
        return _planar_model_from_dict(data)
    missing = [key for key in _REQUIRED_MODEL_KEYS if key not in data]
    if missing:
        raise FormatError(f"missing model keys: {missing}")
    name = data["name"]
    if not isinstance(name, str):
        raise FormatError("name must be a string")
    n = data["n"]
    if not isinstance(n, int) or isinstance(n, bool) or n < 1:
        raise FormatError(f"n must be a positive integer but is {n!r}")
    a = _numeric_array(data["A"], "A", ndim=2)
    if a.shape != (n, n):
        raise ValidationError(f"must be {n}x{n} but has shape {a.shape}", field_path="A")
    diffusion = data["diffusion"]
    if not isinstance(diffusion, list):
        raise FormatError("diffusion must be a list of matrices")
    return LinearSampledModel(
        name=name,
        A=a,
        diffusion=tuple(_numeric_array(g, f"diffusion[{j}]", ndim=2) for j, g in enumerate(diffusion)),
        B_bar=_optional_array(data, "B_bar", ndim=2),
        B_hat=_optional_array(data, "B_hat", ndim=2),
        K_hat=_optional_array(data, "K_hat", ndim=2),
        x0=_optional_array(data, "x0", ndim=1),
    )


def _planar_model_from_dict(data: Dict[str, Any]) -> NonlinearPlanarModel:
    nonlinearity = data["nonlinearity"]
    if not isinstance(nonlinearity, dict) or nonlinearity.get("type") != "planar_sin" or len(nonlinearity) != 1:
        raise FormatError(f"unsupported nonlinearity {nonlinearity!r}, expected {{\"type\": \"planar_sin\"}}")
    if data.get("n", 2) != 2:
        raise ValidationError("the planar model has state dimension 2", field_path="n")
    for key, fixed in (("A", PLANAR_A), ("B_hat", PLANAR_B_HAT)):
        if key in data and not np.array_equal(_numeric_array(data[key], key, ndim=2), fixed):
            raise ValidationError(f"is fixed to {fixed.tolist()} for the planar model", field_path=key)
    if data.get("diffusion", []) != []:
        raise ValidationError("the planar model is deterministic", field_path="diffusion")
    if "B_bar" in data:
        raise ValidationError("the planar model takes K_hat, not B_bar", field_path="B_bar")
    return NonlinearPlanarModel(name=str(data.get("name", "planar")),
                                K_hat=_optional_array(data, "K_hat", ndim=2),
                                x0=_optional_array(data, "x0", ndim=1))


def model_to_dict(model: Model) -> Dict[str, Any]:
    if isinstance(model, NonlinearPlanarModel):
        data: Dict[str, Any] = {"name": model.name, "n": 2, "A": model.A.tolist(), "diffusion": [],
                                "B_hat": model.B_hat.tolist(), "nonlinearity": {"type": "planar_sin"}}
        if model.K_hat is not None:
            data["K_hat"] = model.K_hat.tolist()
    else:
        data = {"name": model.name, "n": model.n, "A": model.A.tolist(),
                "diffusion": [g.tolist() for g in model.diffusion]}
        if model.B_bar is not None:
            data["B_bar"] = model.B_bar.tolist()
        else:
            data["B_hat"] = model.B_hat.tolist()
            if model.K_hat is not None:
                data["K_hat"] = model.K_hat.tolist()
    if model.x0 is not None:
        data["x0"] = model.x0.tolist()
    return data


def save_model(model: Model, path: Path) -> Path:
    return write_text_atomically(path, json.dumps(model_to_dict(model), indent=2) + "\n")


def _numeric_array(value: Any, name: str, *, ndim: int) -> np.ndarray:
    try:
        array = np.array(value, dtype=float)
    except (TypeError, ValueError):
        raise FormatError(f"{name} must be a numeric array of rank {ndim}")
    if array.ndim != ndim:
        raise FormatError(f"{name} must be a numeric array of rank {ndim} but has rank {array.ndim}")
    if not np.all(np.isfinite(array)):
        raise ValidationError("contains non-finite entries", field_path=name)
    return array


def _optional_array(data: Dict[str, Any], key: str, *, ndim: int) -> Optional[np.ndarray]:
    return _numeric_array(data[key], key, ndim=ndim) if key in data else None


def _matrix(value: Any, name: str) -> np.ndarray:
    array = np.array(value, dtype=float)
    if array.ndim != 2:
        raise ValidationError(f"must be a matrix but has rank {array.ndim}", field_path=name)
    if not np.all(np.isfinite(array)):
        raise ValidationError("contains non-finite entries", field_path=name)
    return array


def _initial_state(value: Any, n: int) -> np.ndarray:
    state = np.array(value, dtype=float)
    if state.shape != (n,):
        raise ValidationError(f"must have {n} entries but has shape {state.shape}", field_path="x0")
    return state


def _check_positive(value: float, name: str):
    if not value > 0 or not math.isfinite(value):
        raise ValidationError(f"{name} must be positive and finite but is {value}", field_path="schedule")
