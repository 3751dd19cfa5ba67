"""
Euler–Maruyama simulation of sampled-data loops and of general impulsive systems, plus Monte Carlo estimators.

Every path draws its Gaussian increments from its own Philox stream keyed by (seed, path index, channel),
and paths are processed in batches of a fixed size, so an ensemble does not depend on the worker count.
"""
import csv
import io
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
from scipy import stats

from tjpy_sampled_control.errors import DegenerateEnsemble, DomainError
from tjpy_sampled_control.files import write_text_atomically
from tjpy_sampled_control.models import (GeneralSiDE, Model, NonlinearPlanarModel, SamplingSchedule, Segment,
                                         call_callback, schedule_instants)

_logger = logging.getLogger(__name__)

DIFFUSION_CHANNEL = 0
IMPULSE_CHANNEL = 1


def path_generator(seed: int, path_index: int, channel: int = DIFFUSION_CHANNEL) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(path_index, channel))))


def schedule_generator(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))


@dataclass(frozen=True)
class SimConfig:
    schedule: SamplingSchedule
    dt_sim: float
    horizon: float
    n_paths: int = 1
    seed: int = 0
    store_stride: int = 1
    workers: int = 1
    batch_size: int = 256
    """paths simulated together, fixed so that batching never depends on `workers`"""

    def __post_init__(self):
        if not (self.dt_sim > 0 and self.horizon > 0):
            raise DomainError(f"dt_sim and horizon must be positive but are {self.dt_sim}, {self.horizon}")
        if self.dt_sim > self.schedule.underline_dt / 10 * (1 + 1e-12):
            raise DomainError(f"dt_sim={self.dt_sim} exceeds a tenth of the shortest sampling interval "
                              f"{self.schedule.underline_dt}")
        for name in ("n_paths", "store_stride", "workers", "batch_size"):
            if getattr(self, name) < 1:
                raise DomainError(f"{name} must be a positive integer but is {getattr(self, name)}")


def simulation_grid(instants: np.ndarray, horizon: float, dt_sim: float) -> Tuple[np.ndarray, np.ndarray]:
    """
    Time grid through every sampling instant, each gap split into equal substeps no longer than `dt_sim`.

    :return: grid times and a boolean mask marking the grid points that are sampling instants
    """
    knots = np.append(instants, horizon) if instants[-1] < horizon else instants
    pieces = [np.array([knots[0]])]
    for start, end in zip(knots[:-1], knots[1:]):
        substeps = max(int(math.ceil((end - start) / dt_sim - 1e-9)), 1)
        piece = start + (end - start) * np.arange(1, substeps + 1) / substeps
        piece[-1] = end
        pieces.append(piece)
    times = np.concatenate(pieces)
    is_instant = np.isin(times, instants)
    return times, is_instant


def _stored_indices(n_points: int, stride: int) -> np.ndarray:
    indices = np.arange(0, n_points, stride)
    if indices[-1] != n_points - 1:
        indices = np.append(indices, n_points - 1)
    return indices


def _apply(matrix: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Row-wise matrix-vector product whose value for a row does not depend on the other rows."""
    return (x[:, None, :] * matrix[None, :, :]).sum(axis=-1)


@dataclass(frozen=True)
class _Dynamics:
    n: int
    drift: Callable[[np.ndarray, np.ndarray], np.ndarray]
    """drift(x, held) for a batch of states and the states held at the last sampling instant"""
    diffusion: Tuple[np.ndarray, ...]


def _dynamics(model: Model) -> _Dynamics:
    if isinstance(model, NonlinearPlanarModel):
        model.closed_feedback()
        gain = model.K_hat
        return _Dynamics(2, lambda x, held: model.drift(x, _apply(gain, held)[:, 0]), ())
    b_bar = model.closed_feedback()
    return _Dynamics(model.n, lambda x, held: _apply(model.A, x) + _apply(b_bar, held), model.diffusion)


@dataclass(frozen=True)
class SampledPath:
    times: np.ndarray
    states: np.ndarray
    """stored states, shape (n_stored, n)"""
    instants: np.ndarray
    diverged: bool
    diverged_at: float = math.nan


@dataclass(frozen=True, eq=False)
class TrajectoryEnsemble:
    times: np.ndarray
    states: np.ndarray
    """shape (n_paths, n_stored, n); rows of diverged paths are NaN from the first non-finite step on"""
    instants: np.ndarray
    diverged: np.ndarray
    diverged_at: np.ndarray
    seed: int = 0

    @property
    def n_paths(self) -> int:
        return self.states.shape[0]

    @property
    def n_diverged(self) -> int:
        return int(np.count_nonzero(self.diverged))

    @property
    def horizon(self) -> float:
        return float(self.times[-1])

    def terminal_norms(self) -> np.ndarray:
        return np.linalg.norm(self.states[:, -1, :], axis=1)

    def mean_square_norm(self) -> Tuple[np.ndarray, int]:
        """Ê|x(t)|² over paths that never diverged, and the number of such paths."""
        alive = ~self.diverged
        squares = np.sum(self.states[alive] ** 2, axis=2)
        if squares.shape[0] == 0:
            return np.full(len(self.times), math.nan), 0
        return np.mean(squares, axis=0), int(np.count_nonzero(alive))

    def path(self, index: int) -> SampledPath:
        return SampledPath(self.times, self.states[index], self.instants, bool(self.diverged[index]),
                           float(self.diverged_at[index]))


def _initial_state(model: Model, x0: Optional[np.ndarray]) -> np.ndarray:
    if x0 is not None:
        return np.asarray(x0, dtype=float)
    if model.x0 is not None:
        return model.x0
    return np.zeros(model.n)


def _shared_instants(cfg: SimConfig) -> np.ndarray:
    return schedule_instants(cfg.schedule, cfg.horizon, schedule_generator(cfg.seed))


def _simulate_batch(dynamics: _Dynamics,
                    cfg: SimConfig,
                    times: np.ndarray,
                    is_instant: np.ndarray,
                    x0: np.ndarray,
                    path_indices: Sequence[int]) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    batch = len(path_indices)
    n_steps = len(times) - 1
    channels = len(dynamics.diffusion)
    noise = np.stack([path_generator(cfg.seed, p).standard_normal((n_steps, channels)) for p in path_indices])
    stored = _stored_indices(len(times), cfg.store_stride)
    store_slot = {int(index): slot for slot, index in enumerate(stored)}

    states = np.empty((batch, len(stored), dynamics.n))
    diverged = np.zeros(batch, dtype=bool)
    diverged_at = np.full(batch, math.nan)
    x = np.tile(x0, (batch, 1))
    held = x.copy()
    states[:, 0, :] = x
    with np.errstate(over="ignore", invalid="ignore"):
        for i in range(n_steps):
            if is_instant[i]:
                held = x.copy()
            delta = times[i + 1] - times[i]
            increment = dynamics.drift(x, held) * delta
            for j, g in enumerate(dynamics.diffusion):
                increment = increment + _apply(g, x) * (noise[:, i, j] * math.sqrt(delta))[:, None]
            x = x + increment
            fresh = ~np.all(np.isfinite(x), axis=1) & ~diverged
            if np.any(fresh):
                diverged |= fresh
                diverged_at[fresh] = times[i + 1]
                x[fresh] = math.nan
            slot = store_slot.get(i + 1)
            if slot is not None:
                states[:, slot, :] = x
    return states, diverged, diverged_at


def simulate_sampled_path(model: Model, cfg: SimConfig, path_index: int = 0,
                          *, x0: Optional[np.ndarray] = None) -> SampledPath:
    """
    One Euler–Maruyama path of dx = [f̄(x) + B̄x(t_k)]dt + ḡ(x)dB with x(t_k) refreshed at every sampling
    instant and held in between.
    """
    instants = _shared_instants(cfg)
    times, is_instant = simulation_grid(instants, cfg.horizon, cfg.dt_sim)
    states, diverged, diverged_at = _simulate_batch(_dynamics(model), cfg, times, is_instant,
                                                    _initial_state(model, x0), [path_index])
    if diverged[0]:
        _logger.debug(f"path {path_index} diverged at t={diverged_at[0]:.6g}")
    return SampledPath(times[_stored_indices(len(times), cfg.store_stride)], states[0], instants,
                       bool(diverged[0]), float(diverged_at[0]))


def run_ensemble(model: Model, cfg: SimConfig, *, x0: Optional[np.ndarray] = None) -> TrajectoryEnsemble:
    instants = _shared_instants(cfg)
    times, is_instant = simulation_grid(instants, cfg.horizon, cfg.dt_sim)
    dynamics = _dynamics(model)
    initial = _initial_state(model, x0)
    batches = [list(range(start, min(start + cfg.batch_size, cfg.n_paths)))
               for start in range(0, cfg.n_paths, cfg.batch_size)]

    def run(path_indices: List[int]):
        return _simulate_batch(dynamics, cfg, times, is_instant, initial, path_indices)

    if cfg.workers == 1:
        results = [run(b) for b in batches]
    else:
        with ThreadPoolExecutor(max_workers=cfg.workers) as executor:
            results = list(executor.map(run, batches))
    ensemble = TrajectoryEnsemble(times=times[_stored_indices(len(times), cfg.store_stride)],
                                  states=np.concatenate([r[0] for r in results]),
                                  instants=instants,
                                  diverged=np.concatenate([r[1] for r in results]),
                                  diverged_at=np.concatenate([r[2] for r in results]),
                                  seed=cfg.seed)
    _logger.debug(f"ensemble of {cfg.n_paths} paths over {len(times) - 1} steps, "
                  f"{len(instants)} sampling instants, {ensemble.n_diverged} diverged")
    return ensemble


def simulate_em_discrete(F: np.ndarray,
                         G_list: Sequence[np.ndarray],
                         h: float,
                         n_steps: int,
                         x0: np.ndarray,
                         seed: int = 0,
                         *,
                         n_paths: int = 1) -> np.ndarray:
    """
    X_k = X_{k−1} + F X_{k−1} h + Σ_j G_j X_{k−1} ΔB_{j,k} with ΔB ~ N(0, h).

    Path p draws from the same per-path stream as the sampled-data simulator, so it does not depend on n_paths.

    :return: states of shape (n_paths, n_steps + 1, n)
    """
    if h < 0:
        raise DomainError(f"step size h must be non-negative but is {h}")
    if n_steps < 0 or n_paths < 1:
        raise DomainError(f"need n_steps >= 0 and n_paths >= 1 but got {n_steps}, {n_paths}")
    F = np.asarray(F, dtype=float)
    x0 = np.asarray(x0, dtype=float)
    G_list = [np.asarray(g, dtype=float) for g in G_list]
    noise = np.stack([path_generator(seed, p).standard_normal((n_steps, len(G_list))) for p in range(n_paths)])
    path = np.empty((n_paths, n_steps + 1, len(x0)))
    x = np.tile(x0, (n_paths, 1))
    path[:, 0, :] = x
    for k in range(1, n_steps + 1):
        increment = _apply(F, x) * h
        for j, g in enumerate(G_list):
            increment = increment + _apply(g, x) * (noise[:, k - 1, j] * math.sqrt(h))[:, None]
        x = x + increment
        path[:, k, :] = x
    return path


@dataclass(frozen=True)
class SidePath:
    times: np.ndarray
    x: np.ndarray
    y: np.ndarray
    instants: np.ndarray


def simulate_side(side: GeneralSiDE, cfg: SimConfig, path_index: int = 0) -> SidePath:
    """
    Euler–Maruyama path of a stochastic impulsive system; y jumps at every sampling instant after t_0.

    The jump maps receive the grid history since the previous impulse, ending at the left limit t_k⁻.
    """
    instants = _shared_instants(cfg)
    times, is_instant = simulation_grid(instants, cfg.horizon, cfg.dt_sim)
    n_steps = len(times) - 1
    noise = path_generator(cfg.seed, path_index).standard_normal((n_steps, side.m))
    impulse_noise = path_generator(cfg.seed, path_index, IMPULSE_CHANNEL).standard_normal((len(instants), side.n))
    x = np.zeros(side.n) if side.x0 is None else np.asarray(side.x0, dtype=float)
    y = np.zeros(side.q) if side.y0 is None else np.asarray(side.y0, dtype=float)

    xs = np.empty((len(times), side.n))
    ys = np.empty((len(times), side.q))
    xs[0], ys[0] = x, y
    segment_start = 0
    impulse = 0
    for i in range(n_steps):
        t = float(times[i])
        delta = times[i + 1] - t
        d_brownian = noise[i] * math.sqrt(delta)
        dx = call_callback(lambda: side.f(x, y, t), "f", t) * delta
        dy = call_callback(lambda: side.f_tilde(x, y, t), "f_tilde", t) * delta
        if side.m > 0:
            dx = dx + call_callback(lambda: side.g(x, y, t), "g", t) @ d_brownian
            dy = dy + call_callback(lambda: side.g_tilde(x, y, t), "g_tilde", t) @ d_brownian
        x, y = x + dx, y + dy
        xs[i + 1], ys[i + 1] = x, y
        if is_instant[i + 1]:
            impulse += 1
            t_k = float(times[i + 1])
            segment = Segment(times[segment_start:i + 2], xs[segment_start:i + 2].copy(),
                              ys[segment_start:i + 2].copy())
            jump = call_callback(lambda: side.h_f(segment), "h_f", t_k)
            if side.impulse_noise and side.h_g is not None:
                jump = jump + call_callback(lambda: side.h_g(segment), "h_g", t_k) @ impulse_noise[impulse]
            y = y + jump
            ys[i + 1] = y
            segment_start = i + 1
    stored = _stored_indices(len(times), cfg.store_stride)
    return SidePath(times[stored], xs[stored], ys[stored], instants)


@dataclass(frozen=True)
class DecayEstimate:
    rate: float
    """slope of ln Ê|x(t)|² against t"""
    intercept: float
    r_squared: float
    window: Tuple[float, float]
    n_points: int
    n_alive: int

    @property
    def confirmed(self) -> bool:
        return self.rate < 0 and self.r_squared >= 0.9

    def to_dict(self) -> dict:
        return {"rate": self.rate, "intercept": self.intercept, "r_squared": self.r_squared,
                "window": list(self.window), "n_points": self.n_points, "n_alive": self.n_alive,
                "confirmed": self.confirmed}


def _window(ens: TrajectoryEnsemble, window: Optional[Tuple[float, float]]) -> Tuple[float, float]:
    if window is None:
        return 0.2 * ens.horizon, ens.horizon
    lo, hi = window
    if not 0 <= lo < hi <= ens.horizon * (1 + 1e-12):
        raise DomainError(f"window {window} must lie inside [0, {ens.horizon}] with lo < hi")
    return float(lo), float(hi)


def estimate_ms_decay(ens: TrajectoryEnsemble, window: Optional[Tuple[float, float]] = None) -> DecayEstimate:
    """Least-squares fit of ln Ê|x(t)|² over the window, by default [0.2·horizon, horizon]."""
    lo, hi = _window(ens, window)
    means, n_alive = ens.mean_square_norm()
    if n_alive == 0:
        raise DegenerateEnsemble(f"all {ens.n_paths} paths diverged")
    inside = (ens.times >= lo) & (ens.times <= hi * (1 + 1e-12))
    if np.count_nonzero(inside) < 10:
        raise DegenerateEnsemble(f"only {np.count_nonzero(inside)} stored points in window [{lo}, {hi}], need 10")
    if np.any(means[inside] <= 0):
        raise DegenerateEnsemble(f"mean square norm vanishes inside window [{lo}, {hi}]")
    fit = stats.linregress(ens.times[inside], np.log(means[inside]))
    return DecayEstimate(float(fit.slope), float(fit.intercept), float(fit.rvalue ** 2), (lo, hi),
                         int(np.count_nonzero(inside)), n_alive)


@dataclass(frozen=True)
class ExponentSummary:
    exponents: np.ndarray
    """(1/t)·ln|x(t)| per path, −inf for paths at exactly zero and NaN for diverged paths"""
    t: float
    median: float
    maximum: float
    n_excluded: int

    def to_dict(self) -> dict:
        return {"t": self.t, "median": self.median, "max": self.maximum, "n_excluded": self.n_excluded}


def estimate_as_exponent(ens: TrajectoryEnsemble, window_end: Optional[float] = None) -> ExponentSummary:
    t_end = ens.horizon if window_end is None else window_end
    if not t_end > 0:
        raise DomainError(f"window end must be positive but is {t_end}")
    index = int(np.searchsorted(ens.times, t_end * (1 + 1e-12), side="right")) - 1
    t = float(ens.times[index])
    if not t > 0:
        raise DomainError(f"no stored time in (0, {t_end}]")
    norms = np.linalg.norm(ens.states[:, index, :], axis=1)
    with np.errstate(divide="ignore"):
        exponents = np.log(norms) / t
    finite = np.isfinite(exponents)
    if not np.any(finite):
        raise DegenerateEnsemble(f"no path has a finite non-zero norm at t={t}")
    return ExponentSummary(exponents, t, float(np.median(exponents[finite])), float(np.max(exponents[finite])),
                           int(np.count_nonzero(~finite)))


@dataclass(frozen=True)
class WeakErrorPoint:
    dt: float
    error: float
    """|sample mean − exact mean| of X_T"""
    standard_error: float


def estimate_weak_error(a: float,
                        sigma: float,
                        x0: float,
                        horizon: float,
                        dts: Sequence[float],
                        n_paths: int,
                        seed: int = 0) -> Tuple[WeakErrorPoint, ...]:
    """Weak error of Euler–Maruyama at time `horizon` for dX = aX dt + σX dB, whose mean is x0·e^{aT}."""
    exact = x0 * math.exp(a * horizon)
    points = []
    for ladder_index, dt in enumerate(dts):
        n_steps = int(round(horizon / dt))
        if n_steps < 1 or abs(n_steps * dt - horizon) > 1e-9 * horizon:
            raise DomainError(f"dt={dt} does not divide the horizon {horizon}")
        rng = path_generator(seed, ladder_index)
        x = np.full(n_paths, float(x0))
        for _ in range(n_steps):
            x = x + a * x * dt + sigma * x * rng.standard_normal(n_paths) * math.sqrt(dt)
        points.append(WeakErrorPoint(dt, abs(float(np.mean(x)) - exact), float(np.std(x) / math.sqrt(n_paths))))
        _logger.debug(f"weak error at dt={dt}: {points[-1].error:.4g} (standard error {points[-1].standard_error:.2g})")
    return tuple(points)


def trajectories_csv(ens: TrajectoryEnsemble) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(["t", "path"] + [f"x{i + 1}" for i in range(ens.states.shape[2])])
    for path_index in range(ens.n_paths):
        for t, state in zip(ens.times, ens.states[path_index]):
            writer.writerow([repr(float(t)), path_index] + [repr(float(v)) for v in state])
    return buffer.getvalue()


def statistics_csv(ens: TrajectoryEnsemble) -> str:
    means, n_alive = ens.mean_square_norm()
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(["t", "mean_sq_norm", "n_alive"])
    for t, mean in zip(ens.times, means):
        writer.writerow([repr(float(t)), repr(float(mean)), n_alive])
    return buffer.getvalue()


def write_trajectories_csv(ens: TrajectoryEnsemble, path: Path) -> Path:
    return write_text_atomically(path, trajectories_csv(ens))


def write_statistics_csv(ens: TrajectoryEnsemble, path: Path) -> Path:
    return write_text_atomically(path, statistics_csv(ens))
