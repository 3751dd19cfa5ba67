"""
Linear matrix inequalities: affine maps, certificate verification and a small feasibility solver.

Every verifier assembles an explicit symmetric matrix ``lhs - rhs`` and reports its largest
eigenvalue as the margin, so a margin ≤ 0 means the inequality holds.
"""
import json
import logging
import math
from dataclasses import dataclass, field
from enum import Enum, unique
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import cvxpy as cp
import numpy as np
from scipy.linalg import block_diag

from tjpy_sampled_control.errors import DomainError, FormatError, InfeasibleError, ValidationError
from tjpy_sampled_control.files import assert_path_is_file, write_text_atomically
from tjpy_sampled_control.models import ENVELOPE_E1, PLANAR_A, PLANAR_B_HAT, LinearSampledModel
from tjpy_sampled_control.numerics import (SymMatrix, as_sym_matrix, is_pos_def, lambda_max, pencil_max_eig,
                                           spectral_norm, symmetric_part)

_logger = logging.getLogger(__name__)

CERTIFICATE_TOLERANCE = 1e-2
"""relative tolerance for certificates printed to four or five significant digits"""

_GEVP_TOP_STEP = 100.0


@dataclass(frozen=True, eq=False)
class AffineMatrixMap:
    """x ↦ base + Σ x_i C_i with symmetric base and coefficient matrices of one common order."""
    base: SymMatrix
    coefficients: Tuple[Tuple[int, SymMatrix], ...]
    n_vars: int

    def __post_init__(self):
        base = as_sym_matrix(self.base, name="base")
        object.__setattr__(self, "base", base)
        checked = []
        for index, coefficient in self.coefficients:
            if not 0 <= index < self.n_vars:
                raise DomainError(f"coefficient index {index} outside 0..{self.n_vars - 1}")
            matrix = as_sym_matrix(coefficient, name=f"coefficient {index}")
            if matrix.shape != base.shape:
                raise DomainError(f"coefficient {index} has shape {matrix.shape} but base has {base.shape}")
            checked.append((index, matrix))
        object.__setattr__(self, "coefficients", tuple(checked))

    @property
    def order(self) -> int:
        return self.base.shape[0]

    def __call__(self, x: Sequence[float]) -> SymMatrix:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.n_vars,):
            raise DomainError(f"point must have {self.n_vars} entries but has shape {x.shape}")
        value = self.base.copy()
        for index, coefficient in self.coefficients:
            value += x[index] * coefficient
        return value

    def scaled(self, factor: float) -> 'AffineMatrixMap':
        return AffineMatrixMap(factor * self.base, tuple((i, factor * c) for i, c in self.coefficients), self.n_vars)

    def __add__(self, other: 'AffineMatrixMap') -> 'AffineMatrixMap':
        if other.n_vars != self.n_vars or other.order != self.order:
            raise DomainError("affine maps differ in variable count or order")
        merged: Dict[int, np.ndarray] = {}
        for index, coefficient in self.coefficients + other.coefficients:
            merged[index] = merged.get(index, 0.0) + coefficient
        return AffineMatrixMap(self.base + other.base, tuple(sorted(merged.items(), key=lambda item: item[0])),
                               self.n_vars)

    def __sub__(self, other: 'AffineMatrixMap') -> 'AffineMatrixMap':
        return self + other.scaled(-1.0)

    @classmethod
    def constant(cls, matrix: np.ndarray, n_vars: int = 0) -> 'AffineMatrixMap':
        return cls(as_sym_matrix(matrix), (), n_vars)

    @classmethod
    def from_function(cls, fn: Callable[[np.ndarray], np.ndarray], n_vars: int) -> 'AffineMatrixMap':
        """
        Canonical form of an affine matrix function by probing it at 0 and at every unit vector.

        :raises DomainError: if `fn` is not affine (checked at one additional point)
        """
        base = symmetric_part(np.asarray(fn(np.zeros(n_vars)), dtype=float))
        coefficients = []
        for index in range(n_vars):
            unit = np.zeros(n_vars)
            unit[index] = 1.0
            coefficient = symmetric_part(np.asarray(fn(unit), dtype=float)) - base
            if np.any(coefficient != 0.0):
                coefficients.append((index, coefficient))
        result = cls(base, tuple(coefficients), n_vars)
        sample = np.linspace(0.3, 1.7, n_vars)
        expected = symmetric_part(np.asarray(fn(sample), dtype=float))
        deviation = np.max(np.abs(expected - result(sample))) if n_vars > 0 else 0.0
        if deviation > 1e-9 * (1.0 + np.max(np.abs(expected))):
            raise DomainError(f"matrix function is not affine in its variables (deviation {deviation:.3g})")
        return result

    @classmethod
    def block_diagonal(cls, *maps: 'AffineMatrixMap') -> 'AffineMatrixMap':
        n_vars = maps[0].n_vars
        if any(m.n_vars != n_vars for m in maps):
            raise DomainError("block diagonal maps must share their variables")
        base = block_diag(*[m.base for m in maps])
        coefficients = []
        for index in range(n_vars):
            blocks = [dict(m.coefficients).get(index, np.zeros_like(m.base)) for m in maps]
            stacked = block_diag(*blocks)
            if np.any(stacked != 0.0):
                coefficients.append((index, stacked))
        return cls(base, tuple(coefficients), n_vars)


@dataclass(frozen=True, eq=False)
class LmiCertificate:
    P: SymMatrix
    alpha_bar: float
    P_tilde: Optional[SymMatrix] = None
    extras: Dict[str, float] = field(default_factory=dict)
    """named scalars: alpha_b, gamma1, gamma2, c_tilde, b, c"""
    Q: Optional[SymMatrix] = None
    Y: Optional[np.ndarray] = None
    K_hat: Optional[np.ndarray] = None

    def __post_init__(self):
        if not is_pos_def(self.P):
            raise ValidationError("must be positive definite", field_path="P")
        if self.P_tilde is not None and not is_pos_def(self.P_tilde):
            raise ValidationError("must be positive definite", field_path="P_tilde")
        if not self.alpha_bar > 0:
            raise ValidationError(f"must be positive but is {self.alpha_bar}", field_path="alpha_bar")

    def scalar(self, name: str) -> float:
        if name not in self.extras:
            raise FormatError(f"certificate lacks the constant {name}")
        return self.extras[name]

    @property
    def is_two_function(self) -> bool:
        return "gamma1" in self.extras or "gamma2" in self.extras

    @property
    def is_design_form(self) -> bool:
        return self.Q is not None and self.Y is not None

    def gain(self) -> Optional[np.ndarray]:
        if self.K_hat is not None:
            return self.K_hat
        if self.is_design_form:
            return np.linalg.solve(self.Q, self.Y.T).T
        return None


_CERTIFICATE_MATRICES = ("P", "P_tilde", "Q", "Y", "K_hat")
_CERTIFICATE_SCALARS = ("alpha_b", "gamma1", "gamma2", "c_tilde", "b", "c")


def certificate_from_dict(data: Any) -> LmiCertificate:
    if not isinstance(data, dict):
        raise FormatError("a certificate document must be a JSON object")
    unknown = set(data) - set(_CERTIFICATE_MATRICES) - set(_CERTIFICATE_SCALARS) - {"alpha_bar"}
    if unknown:
        raise FormatError(f"unknown certificate keys: {sorted(unknown)}")
    if "alpha_bar" not in data:
        raise FormatError("certificate lacks alpha_bar")
    matrices = {key: _certificate_matrix(data[key], key) for key in _CERTIFICATE_MATRICES if key in data}
    scalars = {key: _certificate_scalar(data[key], key) for key in _CERTIFICATE_SCALARS if key in data}
    if "P" in matrices:
        p = matrices["P"]
    elif "Q" in matrices:
        p = np.linalg.inv(matrices["Q"])
    else:
        raise FormatError("certificate needs P or Q")
    p_tilde = matrices.get("P_tilde")
    if p_tilde is None and "Q" in matrices and "c_tilde" in scalars:
        p_tilde = scalars["c_tilde"] * p
    if "gamma1" in scalars or "gamma2" in scalars:
        missing = [key for key in ("alpha_b", "gamma1", "gamma2") if key not in scalars]
        if p_tilde is None:
            missing.insert(0, "P_tilde")
        if missing:
            raise FormatError(f"two-function certificate lacks {missing}")
    return LmiCertificate(P=as_sym_matrix(p, name="P"), alpha_bar=_certificate_scalar(data["alpha_bar"], "alpha_bar"),
                          P_tilde=None if p_tilde is None else as_sym_matrix(p_tilde, name="P_tilde"),
                          extras=scalars, Q=matrices.get("Q"), Y=matrices.get("Y"), K_hat=matrices.get("K_hat"))


def certificate_to_dict(certificate: LmiCertificate) -> Dict[str, Any]:
    data: Dict[str, Any] = {"P": certificate.P.tolist(), "alpha_bar": certificate.alpha_bar}
    for key in ("P_tilde", "Q", "Y", "K_hat"):
        value = getattr(certificate, key)
        if value is not None:
            data[key] = value.tolist()
    data.update(certificate.extras)
    return data


def load_certificate(path: Path) -> LmiCertificate:
    assert_path_is_file(path)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as ex:
        raise FormatError(f"certificate file {str(path)} is not valid JSON: {ex}")
    return certificate_from_dict(data)


def save_certificate(certificate: LmiCertificate, path: Path) -> Path:
    return write_text_atomically(path, json.dumps(certificate_to_dict(certificate), indent=2) + "\n")


def _certificate_matrix(value: Any, key: str) -> np.ndarray:
    try:
        matrix = np.array(value, dtype=float)
    except (TypeError, ValueError):
        raise FormatError(f"{key} must be a numeric matrix")
    if matrix.ndim == 1 and key in ("Y", "K_hat"):
        matrix = matrix[None, :]
    if matrix.ndim != 2:
        raise FormatError(f"{key} must be a numeric matrix but has rank {matrix.ndim}")
    if not np.all(np.isfinite(matrix)):
        raise ValidationError("contains non-finite entries", field_path=key)
    return matrix


def _certificate_scalar(value: Any, key: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise FormatError(f"{key} must be a number but is {value!r}")
    return float(value)


@dataclass(frozen=True)
class InequalityCheck:
    """λ_max(lhs − rhs) of one matrix inequality lhs ⪯ rhs, with the norm of its terms as scale."""
    name: str
    margin: float
    scale: float
    tol: float = 0.0

    @property
    def passed(self) -> bool:
        return self.margin <= self.tol

    @property
    def relative_margin(self) -> float:
        return self.margin / self.scale

    def holds(self, rel_tol: float) -> bool:
        return self.margin <= rel_tol * self.scale

    def to_dict(self) -> Dict[str, Any]:
        return {"name": self.name, "margin": self.margin, "scale": self.scale,
                "relative_margin": self.relative_margin}


@dataclass(frozen=True)
class LmiMargins:
    checks: Tuple[InequalityCheck, ...]

    @property
    def margins(self) -> Tuple[float, ...]:
        return tuple(check.margin for check in self.checks)

    @property
    def worst_relative(self) -> float:
        return max(check.relative_margin for check in self.checks)

    def accepted(self, rel_tol: float = 0.0) -> bool:
        return all(check.holds(rel_tol) for check in self.checks)

    def to_dict(self) -> List[Dict[str, Any]]:
        return [check.to_dict() for check in self.checks]


def _inequality(name: str, lhs: np.ndarray, rhs: np.ndarray, tol: float = 0.0) -> InequalityCheck:
    difference = symmetric_part(lhs - rhs)
    scale = max(spectral_norm(lhs), spectral_norm(rhs), np.finfo(float).tiny)
    return InequalityCheck(name, lambda_max(difference), scale, tol)


def _check_square(matrix: np.ndarray, n: int, name: str):
    if matrix.shape != (n, n):
        raise DomainError(f"{name} must be {n}x{n} but has shape {matrix.shape}")


def _noise_term(G_list: Sequence[np.ndarray], P: np.ndarray) -> np.ndarray:
    total = np.zeros_like(P)
    for g in G_list:
        _check_square(g, P.shape[0], "diffusion matrix")
        total = total + g.T @ P @ g
    return total


def verify_lyapunov_ito(F: np.ndarray,
                        G_list: Sequence[np.ndarray],
                        P: SymMatrix,
                        alpha_bar: float,
                        tol: float = 0.0) -> InequalityCheck:
    """FᵀP + PF + ΣGⱼᵀPGⱼ ⪯ −2ᾱP"""
    P = as_sym_matrix(P, name="P")
    n = P.shape[0]
    F = np.asarray(F, dtype=float)
    _check_square(F, n, "F")
    lhs = F.T @ P + P @ F + _noise_term(G_list, P)
    return _inequality("lyapunov-ito", lhs, -2 * alpha_bar * P, tol)


def verify_em_lmi(F: np.ndarray,
                  G_list: Sequence[np.ndarray],
                  P: SymMatrix,
                  h: float,
                  c_bar: float) -> InequalityCheck:
    """(I + hF)ᵀP(I + hF) + hΣGⱼᵀPGⱼ ⪯ (1 − c̄)P for the Euler–Maruyama model with step size h."""
    if not h > 0:
        raise DomainError(f"step size h must be positive but is {h}")
    if not 0 < c_bar < 1:
        raise DomainError(f"c_bar must lie in (0, 1) but is {c_bar}")
    P = as_sym_matrix(P, name="P")
    n = P.shape[0]
    F = np.asarray(F, dtype=float)
    _check_square(F, n, "F")
    step = np.eye(n) + h * F
    lhs = step.T @ P @ step + h * _noise_term(G_list, P)
    return _inequality("lyapunov-ito-em", lhs, (1 - c_bar) * P)


def verify_two_function_lmis(model: LinearSampledModel,
                             P: SymMatrix,
                             P_tilde: SymMatrix,
                             alpha_bar: float,
                             alpha_b: float,
                             gamma1: float,
                             gamma2: float) -> LmiMargins:
    """Lyapunov–Itô inequality, B̄ᵀPB̄ ⪯ ᾱ_bP̃ and the coupling block of a linear sampled loop."""
    P = as_sym_matrix(P, name="P")
    P_tilde = as_sym_matrix(P_tilde, name="P_tilde")
    n = model.n
    _check_square(P, n, "P")
    _check_square(P_tilde, n, "P_tilde")
    b_bar = model.closed_feedback()
    F = model.A + b_bar
    lyapunov = verify_lyapunov_ito(F, model.diffusion, P, alpha_bar)
    feedback = _inequality("feedback-size", b_bar.T @ P @ b_bar, alpha_b * P_tilde)
    lhs = np.block([[_noise_term(model.diffusion, P_tilde), F.T @ P_tilde],
                    [P_tilde @ F, -(b_bar.T @ P_tilde + P_tilde @ b_bar)]])
    rhs = block_diag(gamma1 * P, gamma2 * P_tilde)
    coupling = _inequality("coupling-block", lhs, rhs)
    return LmiMargins((lyapunov, feedback, coupling))


def lyapunov_ito_bk_block(A: np.ndarray,
                          G_list: Sequence[np.ndarray],
                          B_hat: np.ndarray,
                          Q: np.ndarray,
                          Y: np.ndarray,
                          alpha_bar: float) -> np.ndarray:
    """[[QAᵀ + YᵀB̂ᵀ + AQ + B̂Y + 2ᾱQ, (GⱼQ)ᵀ], [GⱼQ, −Q]], ⪯ 0 for decay rate ᾱ."""
    q11 = Q @ A.T + Y.T @ B_hat.T + A @ Q + B_hat @ Y + 2 * alpha_bar * Q
    if len(G_list) == 0:
        return q11
    couplings = [g @ Q for g in G_list]
    top = np.hstack([q11] + [c.T for c in couplings])
    lower = np.hstack([np.vstack(couplings), block_diag(*[-Q for _ in G_list])])
    return np.vstack([top, lower])


def verify_design_lmis(model: LinearSampledModel,
                       Q: SymMatrix,
                       Y: np.ndarray,
                       alpha_bar: float,
                       alpha_b: float,
                       gamma1: float,
                       gamma2: float,
                       c_tilde: float) -> LmiMargins:
    """
    The synthesis inequalities in the variables Q = P⁻¹, Y = K̂Q.

    Congruence with diag(P, P, ...) turns them into the analysis inequalities for P = Q⁻¹, P̃ = c̃Q⁻¹.
    """
    if model.B_hat is None:
        raise DomainError(f"model {model.name} has no input map B_hat")
    if not c_tilde > 0:
        raise DomainError(f"c_tilde must be positive but is {c_tilde}")
    Q = as_sym_matrix(Q, name="Q")
    n = model.n
    _check_square(Q, n, "Q")
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    if Y.shape != (model.B_hat.shape[1], n):
        raise DomainError(f"Y must be {model.B_hat.shape[1]}x{n} but has shape {Y.shape}")
    A, B_hat, G_list = model.A, model.B_hat, model.diffusion
    BY = B_hat @ Y

    decay = lyapunov_ito_bk_block(A, G_list, B_hat, Q, Y, alpha_bar)
    decay_check = _inequality("lyapunov-ito-bk", decay, np.zeros_like(decay))

    feedback = np.block([[-alpha_b * c_tilde * Q, BY.T], [BY, -Q]])
    feedback_check = _inequality("feedback-size-bk", feedback, np.zeros_like(feedback))

    closed = A @ Q + BY
    top = [-gamma1 * Q, c_tilde * closed.T] + [math.sqrt(c_tilde) * (g @ Q).T for g in G_list]
    middle = [c_tilde * closed, -c_tilde * (BY.T + BY) - gamma2 * c_tilde * Q] + [np.zeros((n, n)) for _ in G_list]
    rows = [np.hstack(top), np.hstack(middle)]
    for j, g in enumerate(G_list):
        tail = [np.zeros((n, n)) if i != j else -Q for i in range(len(G_list))]
        rows.append(np.hstack([math.sqrt(c_tilde) * g @ Q, np.zeros((n, n))] + tail))
    coupling = np.vstack(rows)
    coupling_check = _inequality("coupling-block-bk", coupling, np.zeros_like(coupling))
    return LmiMargins((decay_check, feedback_check, coupling_check))


def verify_planar_lmis(gain: np.ndarray,
                       P: SymMatrix,
                       P_tilde: SymMatrix,
                       alpha_bar: float,
                       alpha_b: float,
                       gamma1: float,
                       gamma2: float,
                       b: float,
                       c: float) -> LmiMargins:
    """Inequalities of the planar sine plant, where the nonlinearity enters through the envelope E₁."""
    if not (b > 0 and c > 0):
        raise DomainError(f"b and c must be positive but are {b}, {c}")
    gain = np.atleast_2d(np.asarray(gain, dtype=float))
    if gain.shape != (1, 2):
        raise DomainError(f"gain must be a 1x2 row but has shape {gain.shape}")
    P = as_sym_matrix(P, name="P")
    P_tilde = as_sym_matrix(P_tilde, name="P_tilde")
    _check_square(P, 2, "P")
    _check_square(P_tilde, 2, "P_tilde")
    b_bar = PLANAR_B_HAT @ gain
    closed = PLANAR_A + b_bar
    e1 = ENVELOPE_E1

    decay_lhs = closed.T @ P + P @ closed + b * P + e1.T @ P @ e1 / b
    decay = _inequality("lyapunov-envelope", decay_lhs, -2 * alpha_bar * P)
    feedback = _inequality("feedback-size", b_bar.T @ P @ b_bar, alpha_b * P_tilde)
    lhs = np.block([[e1.T @ P_tilde @ e1 / c, closed.T @ P_tilde],
                    [P_tilde @ closed, -(b_bar.T @ P_tilde + P_tilde @ b_bar) + c * P_tilde]])
    coupling = _inequality("coupling-block", lhs, block_diag(gamma1 * P, gamma2 * P_tilde))
    return LmiMargins((decay, feedback, coupling))


@unique
class SolveStatus(Enum):
    FEASIBLE = "feasible"
    INFEASIBLE_JUDGED = "infeasible_judged"
    FAILED = "failed"


@dataclass(frozen=True)
class SolverOptions:
    solver: Optional[str] = "CLARABEL"
    """cvxpy solver name, None lets cvxpy pick an installed SDP solver"""
    margin_floor: float = -1.0
    """lower bound on the margin variable so that homogeneous problems stay bounded"""
    backoff: float = 1e3
    """objective solves target λ_max ≤ −backoff·strictness to survive solver inaccuracy"""


@dataclass(frozen=True)
class SolveReport:
    status: SolveStatus
    point: Optional[np.ndarray]
    margin: float
    iterations: int
    solver_status: str = ""

    @property
    def feasible(self) -> bool:
        return self.status is SolveStatus.FEASIBLE


def solve_feasibility(lmi_map: AffineMatrixMap,
                      strictness: float = 1e-8,
                      *,
                      objective: Optional[np.ndarray] = None,
                      options: Optional[SolverOptions] = None) -> SolveReport:
    """
    Finds x with λ_max(map(x)) ≤ −strictness.

    Without `objective` the margin t is minimized subject to map(x) ⪯ tI, t ≥ margin_floor. With an
    objective vector c, cᵀx is minimized subject to map(x) ⪯ −backoff·strictness·I. Either way the
    returned point is re-verified with the Jacobi eigensolver before it is reported feasible.
    """
    if lmi_map.n_vars < 1:
        raise DomainError("feasibility problems need at least one variable")
    if not strictness > 0:
        raise DomainError(f"strictness must be positive but is {strictness}")
    options = options or SolverOptions()
    order = lmi_map.order
    x = cp.Variable(lmi_map.n_vars)
    expression = cp.Constant(lmi_map.base)
    for index, coefficient in lmi_map.coefficients:
        expression = expression + x[index] * coefficient
    slack = cp.Variable((order, order), symmetric=True)

    if objective is None:
        t = cp.Variable()
        constraints = [slack == t * np.eye(order) - expression, slack >> 0, t >= options.margin_floor]
        problem = cp.Problem(cp.Minimize(t), constraints)
    else:
        objective = np.asarray(objective, dtype=float)
        if objective.shape != (lmi_map.n_vars,):
            raise DomainError(f"objective must have {lmi_map.n_vars} entries but has shape {objective.shape}")
        target = options.backoff * strictness
        constraints = [slack == -target * np.eye(order) - expression, slack >> 0]
        problem = cp.Problem(cp.Minimize(objective @ x), constraints)

    try:
        if options.solver is None:
            problem.solve()
        else:
            problem.solve(solver=options.solver)
    except cp.error.SolverError as ex:
        _logger.debug(f"solver error on a {order}x{order} LMI with {lmi_map.n_vars} variables: {ex}")
        return SolveReport(SolveStatus.FAILED, None, math.inf, 0, "solver_error")

    iterations = problem.solver_stats.num_iters if problem.solver_stats is not None else None
    iterations = int(iterations) if iterations is not None else 0
    status = str(problem.status)
    if status in (cp.INFEASIBLE, cp.INFEASIBLE_INACCURATE):
        return SolveReport(SolveStatus.INFEASIBLE_JUDGED, None, math.inf, iterations, status)
    if x.value is None:
        return SolveReport(SolveStatus.FAILED, None, math.inf, iterations, status)

    point = np.array(x.value, dtype=float)
    margin = lambda_max(lmi_map(point))
    _logger.debug(f"solver status {status} after {iterations} iterations, verified margin {margin:.3g}")
    if margin <= -strictness:
        return SolveReport(SolveStatus.FEASIBLE, point, margin, iterations, status)
    if objective is None and status == cp.OPTIMAL:
        return SolveReport(SolveStatus.INFEASIBLE_JUDGED, None, margin, iterations, status)
    return SolveReport(SolveStatus.FAILED, None, margin, iterations, status)


@dataclass(frozen=True)
class GevpResult:
    lambda_: float
    point: np.ndarray
    iterations: int


def minimize_gevp(numerator: AffineMatrixMap,
                  denominator: AffineMatrixMap,
                  *,
                  side_constraints: Optional[AffineMatrixMap] = None,
                  lambda_range: Tuple[float, float] = (1e-6, 1e6),
                  iterations: int = 60,
                  relative_tolerance: float = 1e-6,
                  strictness: float = 1e-8,
                  options: Optional[SolverOptions] = None) -> GevpResult:
    """
    Smallest λ such that numerator(x) ⪯ λ·denominator(x) with denominator(x) ≻ 0 for some x.

    Bisects λ geometrically over `lambda_range`; each step is a :func:`solve_feasibility` call.
    Maps without variables reduce to the matrix pencil.
    """
    if numerator.n_vars != denominator.n_vars or numerator.order != denominator.order:
        raise DomainError("numerator and denominator must share variables and order")
    if numerator.n_vars == 0:
        return GevpResult(pencil_max_eig(numerator.base, denominator.base), np.zeros(0), 0)

    def feasible_at(lam: float) -> Optional[np.ndarray]:
        # N − λD ⪯ 0 and N/λ − D ⪯ 0 are the same condition; keep whichever side has unit scale
        pencil = numerator.scaled(1.0 / lam) - denominator if lam > 1.0 else numerator - denominator.scaled(lam)
        blocks = [pencil, denominator.scaled(-1.0)]
        if side_constraints is not None:
            blocks.append(side_constraints)
        report = solve_feasibility(AffineMatrixMap.block_diagonal(*blocks), strictness, options=options)
        if not report.feasible:
            _logger.debug(f"lambda={lam:.6g}: {report.status.value} ({report.solver_status})")
            return None
        if not is_pos_def(denominator(report.point)):
            _logger.debug(f"lambda={lam:.6g}: denominator not positive definite at the candidate, rejected")
            return None
        return report.point

    lo, hi = lambda_range
    point: Optional[np.ndarray] = None
    top = hi
    while point is None and top > lo:
        point = feasible_at(top)
        if point is None:
            top /= _GEVP_TOP_STEP
    if point is None:
        raise InfeasibleError(f"no feasible lambda within [{lo:.3g}, {hi:.3g}]")
    hi = top
    point_lo = feasible_at(lo)
    if point_lo is not None:
        return GevpResult(lo, point_lo, 1)

    performed = 0
    for performed in range(1, iterations + 1):
        if hi / lo - 1.0 <= relative_tolerance:
            break
        middle = math.sqrt(lo * hi)
        candidate = feasible_at(middle)
        if candidate is None:
            lo = middle
        else:
            hi, point = middle, candidate
        _logger.debug(f"gevp bisection {performed}: lambda in [{lo:.8g}, {hi:.8g}]")
    return GevpResult(hi, point, performed)
