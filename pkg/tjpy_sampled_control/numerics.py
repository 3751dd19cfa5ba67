"""
Dense small-matrix linear algebra and scalar root finding.

Matrices handled here are at most a few dozen rows (the largest are the block LMIs of the
synthesis step), so a cyclic Jacobi eigensolver is used for every symmetric eigenproblem.
"""
import logging
import math
from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np
from scipy import optimize

from tjpy_sampled_control.errors import DomainError, NumericalFailure

_logger = logging.getLogger(__name__)

SymMatrix = np.ndarray

_SYMMETRY_TOLERANCE = 1e-9
_JACOBI_MAX_SWEEPS = 100


def as_sym_matrix(values, *, name: str = "matrix") -> SymMatrix:
    """
    Converts `values` into a finite symmetric float matrix.

    The returned array is the exact average of the input and its transpose, so entry (i, j) equals
    entry (j, i) bit for bit. Inputs that are not symmetric up to a relative 1e-9 are rejected.
    """
    matrix = np.array(values, dtype=float)
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1] or matrix.shape[0] < 1:
        raise DomainError(f"{name} must be a non-empty square matrix but has shape {matrix.shape}")
    if not np.all(np.isfinite(matrix)):
        raise DomainError(f"{name} contains non-finite entries")
    asymmetry = np.max(np.abs(matrix - matrix.T))
    if asymmetry > _SYMMETRY_TOLERANCE * (1.0 + np.max(np.abs(matrix))):
        raise DomainError(f"{name} is not symmetric (max |S - S^T| = {asymmetry:.3g})")
    return 0.5 * (matrix + matrix.T)


def symmetric_part(matrix: np.ndarray) -> SymMatrix:
    return 0.5 * (matrix + matrix.T)


def spectral_norm(matrix: np.ndarray) -> float:
    return float(np.linalg.norm(matrix, 2))


class EigenDecomposition(NamedTuple):
    eigenvalues: np.ndarray
    """ascending"""
    eigenvectors: np.ndarray
    """orthonormal, column i belongs to eigenvalues[i]"""


def sym_eig(matrix: SymMatrix) -> EigenDecomposition:
    """
    Cyclic Jacobi eigen decomposition of a symmetric matrix.

    :raises NumericalFailure: if the off-diagonal mass does not vanish within the sweep cap
    """
    a = as_sym_matrix(matrix)
    order = a.shape[0]
    vectors = np.eye(order)
    scale = float(np.sqrt(np.sum(a * a)))
    threshold = 1e-15 * scale

    for sweep in range(_JACOBI_MAX_SWEEPS):
        off_diagonal = float(np.sqrt(np.sum(np.triu(a, 1) ** 2)))
        if off_diagonal <= threshold:
            break
        for p in range(order - 1):
            for q in range(p + 1, order):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                if abs(theta) > 1e150:
                    t = 0.5 / theta
                else:
                    t = math.copysign(1.0, theta) / (abs(theta) + math.sqrt(theta * theta + 1.0))
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                column_p = a[:, p].copy()
                column_q = a[:, q].copy()
                a[:, p] = c * column_p - s * column_q
                a[:, q] = s * column_p + c * column_q
                row_p = a[p, :].copy()
                row_q = a[q, :].copy()
                a[p, :] = c * row_p - s * row_q
                a[q, :] = s * row_p + c * row_q
                a[p, q] = a[q, p] = 0.0
                vector_p = vectors[:, p].copy()
                vector_q = vectors[:, q].copy()
                vectors[:, p] = c * vector_p - s * vector_q
                vectors[:, q] = s * vector_p + c * vector_q
    else:
        raise NumericalFailure(f"Jacobi eigen decomposition of a {order}x{order} matrix did not converge "
                               f"within {_JACOBI_MAX_SWEEPS} sweeps")

    eigenvalues = np.diag(a).copy()
    ordering = np.argsort(eigenvalues, kind="stable")
    return EigenDecomposition(eigenvalues[ordering], vectors[:, ordering])


def lambda_max(matrix: SymMatrix) -> float:
    return float(sym_eig(matrix).eigenvalues[-1])


def lambda_min(matrix: SymMatrix) -> float:
    return float(sym_eig(matrix).eigenvalues[0])


def default_pd_tolerance(matrix: SymMatrix) -> float:
    """Relative tolerance 1e-9·(1+‖S‖) used where printed certificates need a forgiving predicate."""
    return 1e-9 * (1.0 + spectral_norm(matrix))


def is_pos_def(matrix: SymMatrix, tol: float = 0.0) -> bool:
    if tol < 0:
        raise DomainError(f"tolerance must be non-negative but is {tol}")
    return lambda_min(matrix) > tol


def pencil_max_eig(a: SymMatrix, b: SymMatrix) -> float:
    """
    Smallest λ with A ⪯ λB, i.e. the largest eigenvalue of B^{-1/2} A B^{-1/2}.

    :param a: symmetric matrix
    :param b: symmetric positive definite matrix of the same order
    """
    a = as_sym_matrix(a, name="A")
    b = as_sym_matrix(b, name="B")
    if a.shape != b.shape:
        raise DomainError(f"pencil matrices differ in shape: {a.shape} vs {b.shape}")
    if not is_pos_def(b):
        raise DomainError("the pencil denominator B must be positive definite")
    try:
        lower = np.linalg.cholesky(b)
    except np.linalg.LinAlgError as ex:
        raise DomainError(f"the pencil denominator B must be positive definite ({ex})")
    left_solved = np.linalg.solve(lower, a)
    reduced = np.linalg.solve(lower, left_solved.T).T
    return lambda_max(symmetric_part(reduced))


@dataclass(frozen=True)
class Bracket:
    lo: float
    hi: float
    f_lo: float
    f_hi: float

    def __post_init__(self):
        if not self.lo < self.hi:
            raise DomainError(f"bracket must satisfy lo < hi but got [{self.lo}, {self.hi}]")
        if not (math.isfinite(self.f_lo) and math.isfinite(self.f_hi)):
            raise DomainError(f"bracket end values must be finite but are {self.f_lo}, {self.f_hi}")
        if self.f_lo * self.f_hi > 0:
            raise DomainError(f"f does not change sign on [{self.lo}, {self.hi}] "
                              f"(f(lo)={self.f_lo:.6g}, f(hi)={self.f_hi:.6g})")

    @classmethod
    def of(cls, f: Callable[[float], float], lo: float, hi: float) -> 'Bracket':
        return cls(lo, hi, float(f(lo)), float(f(hi)))


def find_root(f: Callable[[float], float],
              bracket: Bracket,
              tol: float = 1e-12,
              *,
              max_iterations: int = 500) -> float:
    """
    Root of `f` inside `bracket` via Brent's method (bisection safeguarding secant and inverse quadratic steps).

    :raises NumericalFailure: if the iteration cap is reached
    """
    if tol <= 0:
        raise DomainError(f"root tolerance must be positive but is {tol}")
    if bracket.f_lo == 0.0:
        return bracket.lo
    if bracket.f_hi == 0.0:
        return bracket.hi
    root, info = optimize.brentq(f, bracket.lo, bracket.hi, xtol=tol, maxiter=max_iterations,
                                 full_output=True, disp=False)
    if not info.converged:
        raise NumericalFailure(f"root search on [{bracket.lo:.6g}, {bracket.hi:.6g}] did not converge "
                               f"after {info.iterations} iterations ({info.flag})")
    _logger.debug(f"root {root:.15g} found on [{bracket.lo:.6g}, {bracket.hi:.6g}] "
                  f"in {info.iterations} iterations")
    return min(max(float(root), bracket.lo), bracket.hi)
