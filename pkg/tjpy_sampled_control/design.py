"""
Constant extraction for the sampling bounds and state-feedback synthesis.

Synthesis works in the variables Q = P⁻¹ and Y = K̂Q, where every closed-loop inequality is affine.
"""
import logging
import math
from dataclasses import dataclass, field
from enum import Enum, unique
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
from scipy import optimize
from scipy.linalg import block_diag

from tjpy_sampled_control.bounds import SamplingBoundResult, TwoFunctionConstants, emulation_bound_two
from tjpy_sampled_control.errors import DomainError, InfeasibleError, ValidationError
from tjpy_sampled_control.lmi import (AffineMatrixMap, LmiCertificate, LmiMargins, SolverOptions, lyapunov_ito_bk_block,
                                      minimize_gevp, solve_feasibility, verify_design_lmis, verify_planar_lmis,
                                      verify_two_function_lmis)
from tjpy_sampled_control.models import LinearSampledModel, NonlinearPlanarModel
from tjpy_sampled_control.numerics import SymMatrix, as_sym_matrix, is_pos_def, pencil_max_eig, spectral_norm

_logger = logging.getLogger(__name__)

ALPHA_LADDER = (0.9, 0.7, 0.5, 0.3, 0.1)
GAMMA_BOX = (1e-4, 1e6)
DESIGN_ACCEPTANCE = 1e-6
"""relative margin tolerated when a fresh design re-verifies its own inequalities"""


def _padded(value: float) -> float:
    return value * (1 + 1e-7) + 1e-9


def _shaded(value: float) -> float:
    return value * (1 - 1e-7)


def extract_alpha_b(P: SymMatrix, P_tilde: SymMatrix, B_bar: np.ndarray) -> float:
    """Least ᾱ_b with (B̄x)ᵀP(B̄x) ≤ ᾱ_b xᵀP̃x."""
    alpha_b = pencil_max_eig(B_bar.T @ P @ B_bar, P_tilde)
    if alpha_b <= 0:
        _logger.info("held feedback vanishes, any positive alpha_b is valid")
    return max(alpha_b, 0.0)


def extract_alpha_f(P: SymMatrix, F: np.ndarray, alpha_bar: float) -> float:
    shifted = F + alpha_bar * np.eye(F.shape[0])
    return max(pencil_max_eig(shifted.T @ P @ shifted, P), 0.0)


def extract_alpha_u(P: SymMatrix, F: np.ndarray) -> float:
    return max(pencil_max_eig(F.T @ P @ F, P), 0.0)


def certified_decay_rate(F: np.ndarray, G_list: Sequence[np.ndarray], P: SymMatrix) -> float:
    """Largest ᾱ with FᵀP + PF + ΣGⱼᵀPGⱼ ⪯ −2ᾱP; negative when P certifies no decay."""
    lhs = F.T @ P + P @ F
    for g in G_list:
        lhs = lhs + g.T @ P @ g
    return -0.5 * pencil_max_eig(lhs, P)


@unique
class GammaStrategy(Enum):
    MAX_BOUND = "max-bound"
    """maximize the sampling bound the pair yields"""
    MIN_SUM = "min-sum"


@dataclass(frozen=True)
class GammaPair:
    gamma1: float
    gamma2: float
    alpha_bar: float
    alpha_b: float
    bound: SamplingBoundResult

    @property
    def constants(self) -> TwoFunctionConstants:
        return TwoFunctionConstants(self.alpha_bar, self.alpha_b, self.gamma1, self.gamma2)


def fit_gamma(model: LinearSampledModel,
              P: SymMatrix,
              P_tilde: SymMatrix,
              strategy: GammaStrategy = GammaStrategy.MAX_BOUND,
              *,
              alpha_bar: Optional[float] = None,
              alpha_b: Optional[float] = None,
              grid_points: int = 80) -> GammaPair:
    """
    Chooses (γ₁, γ₂) for the coupling block inequality of the closed loop of `model`.

    For every γ₂ above the stability floor of −(B̄ᵀP̃ + P̃B̄) the least feasible γ₁ follows from a Schur
    complement, so the search is one-dimensional: a log grid over γ₂ followed by a bounded refinement.

    :param alpha_bar: decay rate, by default the one certified by P
    :param alpha_b: feedback size constant, by default the least valid one
    :raises InfeasibleError: if no pair inside the box [1e-4, 1e6]² is feasible
    """
    P = as_sym_matrix(P, name="P")
    P_tilde = as_sym_matrix(P_tilde, name="P_tilde")
    if not (is_pos_def(P) and is_pos_def(P_tilde)):
        raise DomainError("P and P_tilde must be positive definite")
    b_bar = model.closed_feedback()
    F = model.A + b_bar
    noise = sum((g.T @ P_tilde @ g for g in model.diffusion), np.zeros_like(P))
    cross = b_bar.T @ P_tilde + P_tilde @ b_bar
    floor = pencil_max_eig(-cross, P_tilde)
    lower = max(floor * (1 + 1e-6) + 1e-9, GAMMA_BOX[0]) if floor > 0 else GAMMA_BOX[0]
    if lower >= GAMMA_BOX[1]:
        raise InfeasibleError(f"gamma2 must exceed {floor:.6g}, outside the search box")

    def gamma1_of(gamma2: float) -> float:
        schur = gamma2 * P_tilde + cross
        coupling = F.T @ P_tilde @ np.linalg.solve(schur, P_tilde @ F)
        return _padded(max(pencil_max_eig(0.5 * (noise + coupling + (noise + coupling).T), P), 0.0))

    grid = np.geomspace(lower, GAMMA_BOX[1], grid_points)
    gamma1s = np.array([gamma1_of(g) for g in grid])
    if not np.any(gamma1s <= GAMMA_BOX[1]):
        raise InfeasibleError(f"no feasible (gamma1, gamma2) in [{GAMMA_BOX[0]:g}, {GAMMA_BOX[1]:g}]^2, "
                              f"least gamma1 is {gamma1s.min():.6g}")

    if alpha_bar is None:
        alpha_bar = _shaded(certified_decay_rate(F, model.diffusion, P))
    if not alpha_bar > 0:
        raise InfeasibleError(f"P certifies no decay for model {model.name} (rate {alpha_bar:.6g})")
    if alpha_b is None:
        alpha_b = _padded(extract_alpha_b(P, P_tilde, b_bar))

    def score(gamma2: float) -> float:
        gamma1 = gamma1_of(gamma2)
        if gamma1 > GAMMA_BOX[1]:
            return -math.inf
        if strategy is GammaStrategy.MIN_SUM:
            return -(gamma1 + gamma2)
        return emulation_bound_two(TwoFunctionConstants(alpha_bar, alpha_b, gamma1, gamma2)).tau_max

    scores = np.array([score(g) if g1 <= GAMMA_BOX[1] else -math.inf for g, g1 in zip(grid, gamma1s)])
    best = int(np.argmax(scores))
    gamma2 = float(grid[best])
    left, right = grid[max(best - 1, 0)], grid[min(best + 1, grid_points - 1)]
    if right > left:
        refined = optimize.minimize_scalar(lambda u: -score(math.exp(u)), bounds=(math.log(left), math.log(right)),
                                           method="bounded", options={"xatol": 1e-10})
        if -refined.fun >= scores[best]:
            gamma2 = math.exp(refined.x)
    gamma1 = gamma1_of(gamma2)
    bound = emulation_bound_two(TwoFunctionConstants(alpha_bar, alpha_b, gamma1, gamma2))
    _logger.debug(f"{model.name}: gamma1={gamma1:.6g}, gamma2={gamma2:.6g}, tau={bound.tau_max:.6g} "
                  f"({strategy.value})")
    return GammaPair(gamma1, gamma2, alpha_bar, alpha_b, bound)


@dataclass(frozen=True)
class AnalysisResult:
    certificate: LmiCertificate
    bound: SamplingBoundResult
    margins: LmiMargins


def analysis_certificate(model: LinearSampledModel,
                         P: SymMatrix,
                         P_tilde: SymMatrix,
                         strategy: GammaStrategy = GammaStrategy.MAX_BOUND) -> AnalysisResult:
    """Full two-function certificate of a closed loop from given P and P̃: ᾱ, ᾱ_b, γ₁, γ₂ and the bound."""
    pair = fit_gamma(model, P, P_tilde, strategy)
    certificate = LmiCertificate(P=as_sym_matrix(P, name="P"), alpha_bar=pair.alpha_bar,
                                 P_tilde=as_sym_matrix(P_tilde, name="P_tilde"),
                                 extras={"alpha_b": pair.alpha_b, "gamma1": pair.gamma1, "gamma2": pair.gamma2})
    margins = verify_two_function_lmis(model, certificate.P, certificate.P_tilde, pair.alpha_bar, pair.alpha_b,
                                       pair.gamma1, pair.gamma2)
    return AnalysisResult(certificate, pair.bound, margins)


@dataclass(frozen=True)
class DesignOptions:
    c_tilde: Optional[float] = 1.0
    """scale of P̃ = c̃P; None marks it free, which is only allowed for deterministic plants"""
    alpha_fraction: float = 0.9
    """fraction of the largest achievable decay rate targeted first"""
    strictness: float = 1e-8
    search_ladder: bool = True
    """try every rate of the ladder and keep the largest bound, otherwise stop at the first feasible one"""
    max_decay_rate: float = 100.0
    solver: SolverOptions = field(default_factory=SolverOptions)

    def __post_init__(self):
        if not 0 < self.alpha_fraction < 1:
            raise DomainError(f"alpha_fraction must lie in (0, 1) but is {self.alpha_fraction}")
        if self.c_tilde is not None and not self.c_tilde > 0:
            raise DomainError(f"c_tilde must be positive but is {self.c_tilde}")
        if not self.max_decay_rate > 0:
            raise DomainError(f"max_decay_rate must be positive but is {self.max_decay_rate}")

    def fractions(self) -> Tuple[float, ...]:
        return (self.alpha_fraction,) + tuple(f for f in ALPHA_LADDER if f < self.alpha_fraction)


@dataclass(frozen=True)
class DesignTrace:
    step1_lambda: float
    """minimal generalized eigenvalue, 1/(2λ) is the largest decay rate achievable"""
    attempts: Tuple[Tuple[float, Optional[float]], ...]
    """(alpha fraction, resulting tau_max or None when infeasible)"""
    chosen_fraction: float

    def to_dict(self) -> dict:
        return {"step1_lambda": self.step1_lambda, "chosen_fraction": self.chosen_fraction,
                "attempts": [{"fraction": f, "tau_max": t} for f, t in self.attempts]}


@dataclass(frozen=True, eq=False)
class DesignResult:
    gain: np.ndarray
    Q: SymMatrix
    Y: np.ndarray
    certificate: LmiCertificate
    constants: TwoFunctionConstants
    bound: SamplingBoundResult
    trace: DesignTrace
    c_tilde: float

    @property
    def gain_norm(self) -> float:
        return spectral_norm(self.gain)


@dataclass(frozen=True)
class _Layout:
    """Decision vector x = (upper triangle of Q, rows of Y, extra scalars)."""
    n: int
    inputs: int
    extras: int = 0

    @property
    def n_q(self) -> int:
        return self.n * (self.n + 1) // 2

    @property
    def n_vars(self) -> int:
        return self.n_q + self.inputs * self.n + self.extras

    def unpack(self, x: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        rows, cols = np.triu_indices(self.n)
        q = np.zeros((self.n, self.n))
        q[rows, cols] = x[:self.n_q]
        q[cols, rows] = x[:self.n_q]
        offset = self.n_q + self.inputs * self.n
        return q, np.reshape(x[self.n_q:offset], (self.inputs, self.n)), x[offset:]

    def affine(self, fn: Callable[[np.ndarray, np.ndarray, np.ndarray], np.ndarray]) -> AffineMatrixMap:
        return AffineMatrixMap.from_function(lambda x: fn(*self.unpack(x)), self.n_vars)


def _resolve_c_tilde(model: LinearSampledModel, c_tilde: Optional[float]) -> float:
    if c_tilde is not None:
        return c_tilde
    if not model.is_deterministic:
        raise ValidationError("c_tilde can only be left free for plants without diffusion", field_path="c_tilde")
    return 1.0


def _largest_decay(layout: _Layout,
                   numerator: Callable[[np.ndarray, np.ndarray, np.ndarray], np.ndarray],
                   denominator: Callable[[np.ndarray, np.ndarray, np.ndarray], np.ndarray],
                   options: DesignOptions) -> float:
    side = layout.affine(lambda q, y, e: np.eye(layout.n) - q)
    try:
        result = minimize_gevp(layout.affine(numerator), layout.affine(denominator), side_constraints=side,
                               strictness=options.strictness, options=options.solver)
    except InfeasibleError:
        raise InfeasibleError("plant not stabilizable at any rate found")
    _logger.info(f"largest achievable decay rate {1 / (2 * result.lambda_):.6g} (lambda={result.lambda_:.6g})")
    return result.lambda_


def _gain_bounded_design(layout: _Layout,
                         decay_block: Callable[[np.ndarray, np.ndarray], np.ndarray],
                         options: DesignOptions) -> Tuple[np.ndarray, np.ndarray]:
    """Q ⪰ I and Y satisfying `decay_block` ⪯ 0 with the least bound ρ on ‖Y‖."""
    def blocks(q: np.ndarray, y: np.ndarray, extra: np.ndarray) -> np.ndarray:
        rho = extra[0]
        norm_block = np.block([[-rho * np.eye(layout.inputs), y], [y.T, -rho * np.eye(layout.n)]])
        return block_diag(decay_block(q, y), np.eye(layout.n) - q, norm_block)

    objective = np.zeros(layout.n_vars)
    objective[-1] = 1.0
    report = solve_feasibility(layout.affine(blocks), options.strictness, objective=objective, options=options.solver)
    if not report.feasible:
        raise InfeasibleError(f"design inequalities infeasible ({report.status.value})")
    q, y, _ = layout.unpack(report.point)
    return as_sym_matrix(q, name="Q"), y


def synthesize_feedback(model: LinearSampledModel, options: Optional[DesignOptions] = None) -> DesignResult:
    """
    State-feedback gain K̂ for a linear plant with input map B̂ and the sampling bound it earns.

    1. the largest decay rate any gain achieves (generalized eigenvalue problem)
    2. for each target rate of the ladder a gain of least norm meeting it
    3. ᾱ_b, γ₁ and γ₂ fitted for P = Q⁻¹ and P̃ = c̃P, then the two-function bound
    """
    options = options or DesignOptions()
    if not isinstance(model, LinearSampledModel) or model.B_hat is None:
        raise DomainError(f"model {model.name} has no input map B_hat to design a gain for")
    c_tilde = _resolve_c_tilde(model, options.c_tilde)
    A, B_hat, G_list = model.A, model.B_hat, model.diffusion
    n, inputs = model.n, B_hat.shape[1]
    layout = _Layout(n, inputs)

    step1_lambda = _largest_decay(
        layout,
        lambda q, y, e: block_diag(q, np.zeros((n * len(G_list), n * len(G_list)))),
        lambda q, y, e: -lyapunov_ito_bk_block(A, G_list, B_hat, q, y, 0.0),
        options)
    supremum = 1 / (2 * step1_lambda)

    attempts: List[Tuple[float, Optional[float]]] = []
    best: Optional[DesignResult] = None
    tried_rates = set()
    for fraction in options.fractions():
        alpha_bar = min(fraction * supremum, options.max_decay_rate)
        if alpha_bar in tried_rates:
            continue
        tried_rates.add(alpha_bar)
        try:
            candidate = _design_at_rate(model, alpha_bar, c_tilde, _Layout(n, inputs, extras=1), options)
        except InfeasibleError as ex:
            _logger.info(f"{model.name}: rate fraction {fraction} infeasible: {ex}")
            attempts.append((fraction, None))
            continue
        attempts.append((fraction, candidate.bound.tau_max))
        _logger.info(f"{model.name}: fraction {fraction}, alpha_bar={alpha_bar:.6g}, "
                     f"|K|={candidate.gain_norm:.4g}, tau_max={candidate.bound.tau_max:.6g}")
        if best is None or candidate.bound.tau_max > best.bound.tau_max:
            best = DesignResult(candidate.gain, candidate.Q, candidate.Y, candidate.certificate, candidate.constants,
                                candidate.bound, DesignTrace(step1_lambda, (), fraction), c_tilde)
        if not options.search_ladder:
            break
    if best is None:
        raise InfeasibleError(f"no rate of the ladder {options.fractions()} admits a design for {model.name}")
    trace = DesignTrace(step1_lambda, tuple(attempts), best.trace.chosen_fraction)
    return DesignResult(best.gain, best.Q, best.Y, best.certificate, best.constants, best.bound, trace, c_tilde)


def _design_at_rate(model: LinearSampledModel,
                    alpha_bar: float,
                    c_tilde: float,
                    layout: _Layout,
                    options: DesignOptions) -> DesignResult:
    Q, Y = _gain_bounded_design(
        layout, lambda q, y: lyapunov_ito_bk_block(model.A, model.diffusion, model.B_hat, q, y, alpha_bar), options)
    gain = np.linalg.solve(Q, Y.T).T
    P = as_sym_matrix(np.linalg.inv(Q), name="P")
    P_tilde = c_tilde * P
    closed = model.with_gain(gain)
    pair = fit_gamma(closed, P, P_tilde, alpha_bar=alpha_bar)
    margins = verify_design_lmis(model, Q, Y, pair.alpha_bar, pair.alpha_b, pair.gamma1, pair.gamma2, c_tilde)
    if not margins.accepted(DESIGN_ACCEPTANCE):
        raise InfeasibleError(f"design failed to re-verify, relative margins {margins.worst_relative:.3g}")
    certificate = LmiCertificate(P=P, alpha_bar=pair.alpha_bar, P_tilde=P_tilde,
                                 extras={"alpha_b": pair.alpha_b, "gamma1": pair.gamma1, "gamma2": pair.gamma2,
                                         "c_tilde": c_tilde},
                                 Q=Q, Y=Y, K_hat=gain)
    return DesignResult(gain, Q, Y, certificate, pair.constants, pair.bound, DesignTrace(math.nan, (), math.nan),
                        c_tilde)


@dataclass(frozen=True)
class NonlinearDesignOptions:
    b_values: Tuple[float, ...] = (0.1, 0.3, 1.0, 3.0)
    """weights of the envelope term in the decay inequality"""
    c_values: Tuple[float, ...] = (1.0, 3.0, 10.0, 30.0, 100.0)
    """weights of the envelope term in the coupling inequality"""
    gamma2_offsets: Tuple[float, ...] = (0.1, 1.0, 10.0, 100.0, 1e3, 1e4)
    """γ₂ − c values searched for every c"""
    alpha_fraction: float = 0.9
    strictness: float = 1e-8
    max_decay_rate: float = 100.0
    solver: SolverOptions = field(default_factory=SolverOptions)

    def __post_init__(self):
        for name in ("b_values", "c_values", "gamma2_offsets"):
            values = getattr(self, name)
            if len(values) == 0 or any(not v > 0 for v in values):
                raise DomainError(f"{name} must be a non-empty tuple of positive numbers but is {values}")
        if not 0 < self.alpha_fraction < 1:
            raise DomainError(f"alpha_fraction must lie in (0, 1) but is {self.alpha_fraction}")


def envelope_decay_rate(model: NonlinearPlanarModel, gain: np.ndarray, P: SymMatrix, b: float) -> float:
    """Largest ᾱ with ÃᵀP + PÃ + bP + b⁻¹E₁ᵀPE₁ ⪯ −2ᾱP for Ã = A + B̂K̂."""
    closed = model.A + model.B_hat @ gain
    lhs = closed.T @ P + P @ closed + b * P + model.E1.T @ P @ model.E1 / b
    return -0.5 * pencil_max_eig(lhs, P)


def synthesize_nonlinear_planar(options: Optional[NonlinearDesignOptions] = None,
                                *,
                                model: Optional[NonlinearPlanarModel] = None) -> DesignResult:
    """
    Gain and certificate for the planar sine plant, searched over the envelope weights b and c.

    For each b a gain is designed as in the linear case with the envelope term folded into the decay
    inequality. P̃ is then free: with ᾱ_b normalized to 1 the least γ₁ is found for each (c, γ₂).
    """
    options = options or NonlinearDesignOptions()
    model = model or NonlinearPlanarModel(name="planar-sine")
    A, B_hat, E1 = model.A, model.B_hat, model.E1
    design_options = DesignOptions(alpha_fraction=options.alpha_fraction, strictness=options.strictness,
                                   max_decay_rate=options.max_decay_rate, solver=options.solver)
    best: Optional[DesignResult] = None
    attempts: List[Tuple[float, Optional[float]]] = []

    for b in options.b_values:
        def decay_block(q: np.ndarray, y: np.ndarray, rate: float, b: float = b) -> np.ndarray:
            q11 = q @ A.T + y.T @ B_hat.T + A @ q + B_hat @ y + (b + 2 * rate) * q
            return np.block([[q11, q @ E1.T], [E1 @ q, -b * q]])

        try:
            step1_lambda = _largest_decay(
                _Layout(2, 1),
                lambda q, y, e: block_diag(q, np.zeros((2, 2))),
                lambda q, y, e: -decay_block(q, y, 0.0),
                design_options)
        except InfeasibleError as ex:
            _logger.info(f"envelope weight b={b}: {ex}")
            attempts.append((b, None))
            continue

        candidate = None
        for fraction in design_options.fractions():
            rate = min(fraction / (2 * step1_lambda), options.max_decay_rate)
            try:
                Q, Y = _gain_bounded_design(_Layout(2, 1, extras=1),
                                            lambda q, y, rate=rate: decay_block(q, y, rate), design_options)
            except InfeasibleError:
                continue
            candidate = _planar_certificate(model, Q, Y, b, options)
            if candidate is not None:
                break
        attempts.append((b, None if candidate is None else candidate.bound.tau_max))
        if candidate is not None and (best is None or candidate.bound.tau_max > best.bound.tau_max):
            best = DesignResult(candidate.gain, candidate.Q, candidate.Y, candidate.certificate, candidate.constants,
                                candidate.bound, DesignTrace(step1_lambda, (), b), 1.0)

    if best is None:
        raise InfeasibleError(f"no envelope weights in b={options.b_values}, c={options.c_values} admit a design")
    trace = DesignTrace(best.trace.step1_lambda, tuple(attempts), best.trace.chosen_fraction)
    _logger.info(f"planar design: K={best.gain.ravel().tolist()}, tau_max={best.bound.tau_max:.6g}")
    return DesignResult(best.gain, best.Q, best.Y, best.certificate, best.constants, best.bound, trace, 1.0)


def _planar_certificate(model: NonlinearPlanarModel,
                        Q: SymMatrix,
                        Y: np.ndarray,
                        b: float,
                        options: NonlinearDesignOptions) -> Optional[DesignResult]:
    gain = np.linalg.solve(Q, Y.T).T
    P = as_sym_matrix(np.linalg.inv(Q), name="P")
    alpha_bar = _shaded(envelope_decay_rate(model, gain, P, b))
    if not alpha_bar > 0:
        return None
    b_bar = model.B_hat @ gain
    closed = model.A + b_bar
    E1 = model.E1
    layout = _Layout(2, 0, extras=1)
    best: Optional[DesignResult] = None

    for c in options.c_values:
        for offset in options.gamma2_offsets:
            def blocks(p_tilde: np.ndarray, _: np.ndarray, extra: np.ndarray, c: float = c,
                       offset: float = offset) -> np.ndarray:
                gamma1 = extra[0]
                coupling = np.block([[E1.T @ p_tilde @ E1 / c - gamma1 * P, closed.T @ p_tilde],
                                     [p_tilde @ closed, -(b_bar.T @ p_tilde + p_tilde @ b_bar) - offset * p_tilde]])
                return block_diag(b_bar.T @ P @ b_bar - p_tilde, coupling)

            objective = np.zeros(layout.n_vars)
            objective[-1] = 1.0
            report = solve_feasibility(layout.affine(blocks), options.strictness, objective=objective,
                                       options=options.solver)
            if not report.feasible:
                continue
            p_tilde, _, extra = layout.unpack(report.point)
            p_tilde = as_sym_matrix(p_tilde, name="P_tilde")
            if not is_pos_def(p_tilde):
                continue
            gamma1, gamma2 = float(extra[0]), c + offset
            constants = TwoFunctionConstants(alpha_bar, 1.0, gamma1, gamma2)
            margins = verify_planar_lmis(gain, P, p_tilde, alpha_bar, 1.0, gamma1, gamma2, b, c)
            if not margins.accepted(DESIGN_ACCEPTANCE):
                continue
            bound = emulation_bound_two(constants)
            _logger.debug(f"b={b}, c={c}, gamma2={gamma2:.6g}: gamma1={gamma1:.6g}, tau={bound.tau_max:.6g}")
            if best is None or bound.tau_max > best.bound.tau_max:
                certificate = LmiCertificate(P=P, alpha_bar=alpha_bar, P_tilde=p_tilde,
                                             extras={"alpha_b": 1.0, "gamma1": gamma1, "gamma2": gamma2,
                                                     "b": b, "c": c},
                                             Q=Q, Y=Y, K_hat=gain)
                best = DesignResult(gain, Q, Y, certificate, constants, bound, DesignTrace(math.nan, (), b), 1.0)
    return best
