"""
Maximum allowable sampling intervals computed from Lyapunov constants.

Every bound is the maximum over q of a closed-form τ̂(q). The maximizer is the root of the
derivative of that curve, solved on the interval on which the formula is stated. The reported
``tau_max`` is a strict bound: sampling intervals must stay strictly below it.
"""
import logging
import math
from dataclasses import dataclass, field
from enum import Enum, unique
from typing import Optional, Tuple, Union

import numpy as np

from tjpy_sampled_control.errors import DomainError, InfeasibleError
from tjpy_sampled_control.numerics import Bracket, find_root

_logger = logging.getLogger(__name__)

_ROOT_TOL = 1e-15
_Q_FLOOR = 1e-300
_INV_E = math.exp(-1.0)


def _require(condition: bool, message: str):
    if not condition:
        raise DomainError(message)


@dataclass(frozen=True)
class GainConstants:
    """Constants of a pair of candidate Lyapunov functions for the physical (x) and cyber (y) blocks."""
    alpha1: float
    alpha2: float
    alphat1: float
    alphat2: float
    beta1: float = 0.0
    beta2: float = 0.0
    beta3: float = 0.0
    p: float = 2.0

    def __post_init__(self):
        _require(self.alpha1 > 0, f"alpha1 must be positive but is {self.alpha1}")
        _require(self.alphat2 > 0, f"alphat2 must be positive but is {self.alphat2}")
        _require(self.p > 0, f"p must be positive but is {self.p}")
        for name in ("alpha2", "alphat1", "beta1", "beta2", "beta3"):
            value = getattr(self, name)
            _require(value >= 0, f"{name} must be non-negative but is {value}")


@dataclass(frozen=True)
class EmulationConstants:
    """ᾱ (decay of the closed loop), ᾱ_b (size of the held feedback) and ᾱ_f (drift growth) of a single V."""
    alpha_bar: float
    alpha_b: float
    alpha_f: float

    def __post_init__(self):
        for name in ("alpha_bar", "alpha_b", "alpha_f"):
            value = getattr(self, name)
            _require(value > 0 and math.isfinite(value), f"{name} must be positive and finite but is {value}")


@dataclass(frozen=True)
class TwoFunctionConstants:
    alpha_bar: float
    alpha_b: float
    gamma1: float
    gamma2: float

    def __post_init__(self):
        for name in ("alpha_bar", "alpha_b", "gamma1", "gamma2"):
            value = getattr(self, name)
            _require(value > 0 and math.isfinite(value), f"{name} must be positive and finite but is {value}")


Constants = Union[GainConstants, EmulationConstants, TwoFunctionConstants]


@unique
class Provenance(Enum):
    GENERIC = "generic"
    SINGLE_V = "single-v"
    SINGLE_V_RATE = "single-v-rate"
    TWO_V = "two-v"
    DTA = "dta"


@dataclass(frozen=True)
class ImpulseCondition:
    value: float
    ok: bool
    degenerate: bool


@dataclass(frozen=True)
class SamplingBoundResult:
    q_star: float
    tau_max: float
    provenance: Provenance
    constants: Constants
    q_interval: Tuple[float, float]
    """open interval over which τ̂(q) is admissible, used for plotting"""
    b1_star: Optional[float] = None
    b2_star: Optional[float] = None
    q_hat_0: Optional[float] = None
    r_star: Optional[float] = None
    alpha_bar: Optional[float] = None
    iss_free: bool = False
    almost_sure: bool = field(default=True)
    """a p-th moment exponential certificate also gives almost-sure exponential stability"""

    def to_dict(self) -> dict:
        data = {
            "provenance": self.provenance.value,
            "q_star": self.q_star,
            "tau_max": self.tau_max,
            "q_interval": list(self.q_interval),
            "constants": {k: v for k, v in vars(self.constants).items()},
            "almost_sure": self.almost_sure,
        }
        for key in ("b1_star", "b2_star", "q_hat_0", "r_star", "alpha_bar"):
            if getattr(self, key) is not None:
                data[key] = getattr(self, key)
        if self.iss_free:
            data["iss_free"] = True
        return data


def htau_generic(q: float, g: GainConstants) -> float:
    """τ̂(q̂) = −ln q̂ / ((α₁q̂)⁻¹α₂α̃₁ + α̃₂), or −ln q̂ / α̃₂ when α₂α̃₁ = 0."""
    if not 0 < q < 1:
        raise DomainError(f"q must lie in (0, 1) but is {q}")
    coupling = g.alpha2 * g.alphat1
    if coupling == 0:
        return -math.log(q) / g.alphat2
    return -math.log(q) / (coupling / (g.alpha1 * q) + g.alphat2)


def check_impulse_condition(g: GainConstants) -> ImpulseCondition:
    """s = α₁⁻¹α₂β̃₁ + β̃₂ + β̃₃ must stay below 1. s = 0 is the sampled-data case."""
    value = g.alpha2 * g.beta1 / g.alpha1 + g.beta2 + g.beta3
    return ImpulseCondition(value=value, ok=value < 1, degenerate=value == 0)


def solve_qhat_star(g: GainConstants, *, q_hat: Optional[float] = None) -> SamplingBoundResult:
    """
    Maximizes the generic bound over q̂ ∈ (q̂₀, 1).

    When α₂α̃₁ = 0 the curve is −ln q̂ / α̃₂ and has no interior maximum: the bound is then
    evaluated at the caller's `q_hat`, or at the supremum q̂ → s⁺ if s > 0.
    """
    condition = check_impulse_condition(g)
    if not condition.ok:
        raise InfeasibleError(f"impulse condition fails: alpha2*beta1/alpha1 + beta2 + beta3 = "
                              f"{condition.value:.6g} >= 1")
    s = condition.value

    if g.alpha2 * g.alphat1 == 0:
        if q_hat is not None:
            if not s < q_hat < 1:
                raise DomainError(f"q_hat must lie in ({s:.6g}, 1) but is {q_hat}")
            q_used = q_hat
        elif s > 0:
            q_used = s
        else:
            raise DomainError("the bound is governed by alphat2 alone and unbounded as q -> 0; supply q_hat")
        tau = htau_generic(q_used, g)
        _logger.debug(f"ISS-free branch: tau={tau:.6g} at q={q_used:.6g}")
        return SamplingBoundResult(q_star=q_used, tau_max=tau, provenance=Provenance.GENERIC, constants=g,
                                   q_interval=(max(s, 0.0), 1.0), q_hat_0=s, iss_free=True,
                                   almost_sure=g.p >= 1)

    k = g.alpha2 * g.alphat1 / (g.alpha1 * g.alphat2)
    lower = max(math.exp(-(1.0 + k) / k), _Q_FLOOR)
    equation = lambda q: qhat_star_equation(q, g)  # noqa: E731
    q_star = find_root(equation, Bracket.of(equation, lower, 1.0), _ROOT_TOL)
    q_hat_0 = max(s, lower)
    q_used = max(q_star, q_hat_0)
    tau = htau_generic(q_used, g)
    _logger.debug(f"generic bound: q*={q_star:.10g}, q0={q_hat_0:.6g}, tau={tau:.6g}")
    return SamplingBoundResult(q_star=q_used, tau_max=tau, provenance=Provenance.GENERIC, constants=g,
                               q_interval=(q_hat_0, 1.0), q_hat_0=q_hat_0, almost_sure=g.p >= 1)


def qhat_star_equation(q: float, g: GainConstants) -> float:
    """(α₂α̃₁/(α₁α̃₂))(1 + ln q̂) + q̂, vanishing at the generic maximizer."""
    return g.alpha2 * g.alphat1 / (g.alpha1 * g.alphat2) * (1.0 + math.log(q)) + q


def btau_single(q: float, b1: float, b2: float, c: EmulationConstants) -> float:
    """The single-function bound as a function of q and the two free weights b₁, b₂ > 0."""
    alpha, alpha_b, alpha_f = c.alpha_bar, c.alpha_b, c.alpha_f
    numerator = -alpha * alpha * q * math.log(q)
    denominator = ((2 * math.sqrt(alpha_b) + b1 + (b1 + alpha) * b2) * alpha * alpha * q
                   + alpha_b * (b1 + alpha_f / b1 + (b1 + alpha) / b2))
    return numerator / denominator


def single_root_equation(q: float, c: EmulationConstants) -> float:
    """Derivative condition of the single-function bound after eliminating b₁ and b₂."""
    r = c.alpha_bar * math.sqrt(q)
    mix = c.alpha_bar + math.sqrt(c.alpha_f)
    return 2 * r * r + mix * r + (mix * r + 2 * math.sqrt(c.alpha_b * c.alpha_f)) * (math.log(q) + 1.0)


def htau_single(q: Union[float, np.ndarray], c: EmulationConstants, q_star: float) -> Union[float, np.ndarray]:
    """τ̂(q) with the weights frozen at their optima for `q_star`."""
    q = np.asarray(q, dtype=float)
    r = c.alpha_bar * np.sqrt(q)
    r_star = c.alpha_bar * math.sqrt(q_star)
    mix = c.alpha_bar + math.sqrt(c.alpha_f)
    denominator = math.sqrt(c.alpha_b) * ((2 * r_star + mix) * r * r + mix * r_star * r_star
                                          + 2 * math.sqrt(c.alpha_b * c.alpha_f) * r_star)
    value = -r_star * r * r * np.log(q) / denominator
    return float(value) if value.ndim == 0 else value


def emulation_bound_single(c: EmulationConstants) -> SamplingBoundResult:
    equation = lambda q: single_root_equation(q, c)  # noqa: E731
    q_star = find_root(equation, Bracket.of(equation, _Q_FLOOR, _INV_E), _ROOT_TOL)
    root_q = math.sqrt(q_star)
    b2_star = math.sqrt(c.alpha_b) / (c.alpha_bar * root_q)
    b1_star = math.sqrt(c.alpha_b * c.alpha_f) / (c.alpha_bar * root_q + math.sqrt(c.alpha_b))
    tau = htau_single(q_star, c, q_star)
    _logger.debug(f"single-V bound: q*={q_star:.10g}, b1*={b1_star:.6g}, b2*={b2_star:.6g}, tau={tau:.6g}")
    return SamplingBoundResult(q_star=q_star, tau_max=float(tau), provenance=Provenance.SINGLE_V, constants=c,
                               q_interval=(0.0, _INV_E), b1_star=b1_star, b2_star=b2_star, alpha_bar=c.alpha_bar)


def single_rate_equation(r: float, c: EmulationConstants) -> float:
    mix = c.alpha_bar + math.sqrt(c.alpha_f)
    return (2 * r * r + mix * r
            + 2 * (mix * r + 2 * math.sqrt(c.alpha_b * c.alpha_f)) * (math.log(r) - math.log(c.alpha_bar) + 0.5))


def htau_single_rate(r: Union[float, np.ndarray], c: EmulationConstants, r_star: float) -> Union[float, np.ndarray]:
    """τ̂ in the rate parameter r̄ = ᾱ√q."""
    r = np.asarray(r, dtype=float)
    mix = c.alpha_bar + math.sqrt(c.alpha_f)
    denominator = math.sqrt(c.alpha_b) * ((2 * r_star + mix) * r * r + mix * r_star * r_star
                                          + 2 * math.sqrt(c.alpha_b * c.alpha_f) * r_star)
    value = -2 * r_star * r * r * (np.log(r) - math.log(c.alpha_bar)) / denominator
    return float(value) if value.ndim == 0 else value


def emulation_bound_single_rate_form(c: EmulationConstants) -> SamplingBoundResult:
    """Same bound as :func:`emulation_bound_single`, solved for r̄* ∈ (0, ᾱ/√e) instead of q*."""
    upper = c.alpha_bar * math.exp(-0.5)
    equation = lambda r: single_rate_equation(r, c)  # noqa: E731
    r_star = find_root(equation, Bracket.of(equation, _Q_FLOOR, upper), _ROOT_TOL)
    q_star = (r_star / c.alpha_bar) ** 2
    root_q = r_star / c.alpha_bar
    tau = htau_single_rate(r_star, c, r_star)
    return SamplingBoundResult(q_star=q_star, tau_max=float(tau), provenance=Provenance.SINGLE_V_RATE, constants=c,
                               q_interval=(0.0, _INV_E),
                               b1_star=math.sqrt(c.alpha_b * c.alpha_f) / (r_star + math.sqrt(c.alpha_b)),
                               b2_star=math.sqrt(c.alpha_b) / (c.alpha_bar * root_q),
                               r_star=r_star, alpha_bar=c.alpha_bar)


def two_root_equation(q: float, c: TwoFunctionConstants) -> float:
    return c.alpha_bar ** 2 * c.gamma2 * q + c.alpha_b * c.gamma1 * (math.log(q) + 1.0)


def htau_two(q: Union[float, np.ndarray], c: TwoFunctionConstants) -> Union[float, np.ndarray]:
    """τ̂(q) = −ᾱ²q ln q / (ᾱ_bγ₁ + γ₂ᾱ²q)"""
    q = np.asarray(q, dtype=float)
    alpha_sq = c.alpha_bar ** 2
    value = -alpha_sq * q * np.log(q) / (c.alpha_b * c.gamma1 + c.gamma2 * alpha_sq * q)
    return float(value) if value.ndim == 0 else value


def emulation_bound_two(c: TwoFunctionConstants) -> SamplingBoundResult:
    equation = lambda q: two_root_equation(q, c)  # noqa: E731
    q_star = find_root(equation, Bracket.of(equation, _Q_FLOOR, _INV_E), _ROOT_TOL)
    tau = htau_two(q_star, c)
    _logger.debug(f"two-V bound: q*={q_star:.10g}, tau={tau:.6g}")
    return SamplingBoundResult(q_star=q_star, tau_max=float(tau), provenance=Provenance.TWO_V, constants=c,
                               q_interval=(0.0, _INV_E), alpha_bar=c.alpha_bar)


def dta_step_range(alpha_bar: float, alpha_u: float) -> Tuple[float, float]:
    """Open interval (0, (2ᾱ/ᾱ_u) ∧ (2ᾱ)⁻¹) of admissible Euler–Maruyama step sizes."""
    _require(alpha_bar > 0 and alpha_u > 0, f"alpha_bar and alpha_u must be positive but are {alpha_bar}, {alpha_u}")
    return 0.0, min(2 * alpha_bar / alpha_u, 1.0 / (2 * alpha_bar))


def dta_c_bar(alpha_bar: float, alpha_u: float, h: float) -> float:
    """c̄ = (2ᾱ − ᾱ_u h)h, the one-step contraction of the discretized model for step size h."""
    lo, hi = dta_step_range(alpha_bar, alpha_u)
    if not lo < h < hi:
        raise DomainError(f"step size h must lie in the open interval ({lo}, {hi:.6g}) but is {h}")
    return (2 * alpha_bar - alpha_u * h) * h


def dta_map(c_bar: float, h: float, alpha_u: float) -> float:
    """ᾱ with 2ᾱ = c̄/h + ᾱ_u h."""
    _require(0 < c_bar < 1, f"c_bar must lie in (0, 1) but is {c_bar}")
    _require(h > 0, f"h must be positive but is {h}")
    _require(alpha_u > 0, f"alpha_u must be positive but is {alpha_u}")
    alpha_bar = (c_bar / h + alpha_u * h) / 2
    _, upper = dta_step_range(alpha_bar, alpha_u)
    if not h < upper:
        raise DomainError(f"step size h={h} is not strictly inside (0, {upper:.6g}) for alpha_bar={alpha_bar:.6g}")
    return alpha_bar


def dta_bound(c_bar: float, h: float, alpha_u: float, alpha_b: float, alpha_f: float) -> SamplingBoundResult:
    alpha_bar = dta_map(c_bar, h, alpha_u)
    result = emulation_bound_single_rate_form(EmulationConstants(alpha_bar, alpha_b, alpha_f))
    return SamplingBoundResult(q_star=result.q_star, tau_max=result.tau_max, provenance=Provenance.DTA,
                               constants=result.constants, q_interval=result.q_interval, b1_star=result.b1_star,
                               b2_star=result.b2_star, r_star=result.r_star, alpha_bar=alpha_bar)


def tau_curve(result: SamplingBoundResult, n_points: int = 200) -> Tuple[np.ndarray, np.ndarray]:
    """`n_points` samples of τ̂(q) strictly inside the admissible q interval of `result`."""
    lo, hi = result.q_interval
    qs = np.linspace(lo, hi, n_points + 2)[1:-1]
    constants = result.constants
    if isinstance(constants, GainConstants):
        taus = np.array([htau_generic(q, constants) for q in qs])
    elif isinstance(constants, TwoFunctionConstants):
        taus = np.asarray(htau_two(qs, constants))
    else:
        taus = np.asarray(htau_single(qs, constants, result.q_star))
    return qs, taus


def htau_single_curve(q: Union[float, np.ndarray], c: EmulationConstants) -> Union[float, np.ndarray]:
    """τ̂(q) of the single-function bound with the weights fixed at the optimum of `c`."""
    return htau_single(q, c, emulation_bound_single(c).q_star)


def almost_sure_flag(result: SamplingBoundResult, p: Optional[float] = None) -> bool:
    """
    Whether a p-th moment certificate also yields almost-sure exponential stability, which holds for p ≥ 1.

    `p` defaults to the moment order of generic constants and to 2 for the quadratic certificates.
    """
    if p is None:
        p = result.constants.p if isinstance(result.constants, GainConstants) else 2.0
    return p >= 1 and result.tau_max > 0
