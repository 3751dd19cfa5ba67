import math

import numpy as np
from pytest import fail, fixture, raises
from scipy import linalg

import tjpy_sampled_control.numerics as mut


@fixture
def rng():
    return np.random.default_rng(2024)


def random_symmetric(rng, order: int) -> np.ndarray:
    m = rng.normal(size=(order, order))
    return m + m.T


def random_pos_def(rng, order: int) -> np.ndarray:
    m = rng.normal(size=(order, order))
    return m @ m.T + order * np.eye(order)


class TestAsSymMatrix:

    def test_result_is_exactly_symmetric(self):
        s = mut.as_sym_matrix([[1.0, 2.0 + 1e-12], [2.0, 3.0]])
        assert s[0, 1] == s[1, 0]

    def test_asymmetric__rejected(self):
        try:
            mut.as_sym_matrix([[1.0, 2.0], [0.0, 1.0]], name="P")
            fail("should have thrown exception")
        except mut.DomainError as ex:
            assert "P is not symmetric" in ex.args[0]

    def test_non_square__rejected(self):
        with raises(mut.DomainError):
            mut.as_sym_matrix(np.ones((2, 3)))

    def test_non_finite__rejected(self):
        with raises(mut.DomainError):
            mut.as_sym_matrix([[math.nan, 0.0], [0.0, 1.0]])


class TestSymEig:

    def test_identity(self):
        decomposition = mut.sym_eig(np.eye(2))
        assert np.allclose(decomposition.eigenvalues, [1.0, 1.0])

    def test_diagonal(self):
        decomposition = mut.sym_eig(np.diag([5.0, -3.0]))
        assert np.allclose(decomposition.eigenvalues, [-3.0, 5.0])
        assert np.allclose(np.abs(decomposition.eigenvectors), [[0.0, 1.0], [1.0, 0.0]])

    def test_random__reconstruction(self, rng):
        for order in (2, 4, 8):
            s = random_symmetric(rng, order)
            values, vectors = mut.sym_eig(s)
            scale = 1.0 + np.linalg.norm(s, 2)
            assert np.max(np.abs(vectors @ np.diag(values) @ vectors.T - s)) <= 1e-10 * scale
            assert np.max(np.abs(vectors.T @ vectors - np.eye(order))) <= 1e-10
            assert np.all(np.diff(values) >= 0)

    def test_random__matches_dense_solver(self, rng):
        s = random_symmetric(rng, 6)
        assert np.allclose(mut.sym_eig(s).eigenvalues, linalg.eigh(s, eigvals_only=True), atol=1e-10)

    def test_quadratic_forms_on_grid(self, rng):
        s = random_symmetric(rng, 3)
        values, vectors = mut.sym_eig(s)
        for angle in np.linspace(0, math.pi, 17):
            v = np.array([math.cos(angle), math.sin(angle), 0.5])
            v = v / np.linalg.norm(v)
            expected = np.sum(values * (v @ vectors) ** 2)
            assert abs(v @ s @ v - expected) <= 1e-8 * (1 + np.linalg.norm(s, 2))

    def test_zero_matrix(self):
        assert np.allclose(mut.sym_eig(np.zeros((3, 3))).eigenvalues, 0.0)


class TestIsPosDef:

    def test_identity(self):
        assert mut.is_pos_def(np.eye(3), 0.0)

    def test_zero__semidefinite_boundary(self):
        assert not mut.is_pos_def(np.zeros((2, 2)), 0.0)

    def test_reference_certificate(self):
        assert mut.is_pos_def(np.array([[2.2173, 0.8212], [0.8212, 6.1228]]), 0.0)

    def test_tolerance(self):
        assert not mut.is_pos_def(np.eye(2) * 1e-3, 1e-2)

    def test_negative_tolerance__rejected(self):
        with raises(mut.DomainError):
            mut.is_pos_def(np.eye(2), -1.0)


class TestPencilMaxEig:

    def test_scaled_identity(self):
        assert abs(mut.pencil_max_eig(2 * np.eye(2), np.eye(2)) - 2.0) < 1e-12

    def test_diagonal_ratio(self):
        assert abs(mut.pencil_max_eig(np.diag([1.0, 8.0]), np.diag([1.0, 4.0])) - 2.0) < 1e-12

    def test_random__matches_general_eigensolver(self, rng):
        a = random_symmetric(rng, 4)
        b = random_pos_def(rng, 4)
        expected = np.max(linalg.eigh(a, b, eigvals_only=True))
        assert abs(mut.pencil_max_eig(a, b) - expected) <= 1e-8 * (1 + abs(expected))

    def test_result_makes_pencil_semidefinite(self, rng):
        a = random_symmetric(rng, 3)
        b = random_pos_def(rng, 3)
        lam = mut.pencil_max_eig(a, b)
        assert mut.lambda_max(a - lam * b) <= 1e-9

    def test_congruence_invariance(self, rng):
        a = random_symmetric(rng, 3)
        b = random_pos_def(rng, 3)
        m = rng.normal(size=(3, 3)) + 3 * np.eye(3)
        assert abs(mut.pencil_max_eig(a, b) - mut.pencil_max_eig(m.T @ a @ m, m.T @ b @ m)) < 1e-7

    def test_indefinite_denominator__rejected(self):
        try:
            mut.pencil_max_eig(np.eye(2), np.diag([1.0, -1.0]))
            fail("should have thrown exception")
        except mut.DomainError as ex:
            assert "positive definite" in ex.args[0]

    def test_shape_mismatch__rejected(self):
        with raises(mut.DomainError):
            mut.pencil_max_eig(np.eye(2), np.eye(3))


class TestBracket:

    def test_no_sign_change__rejected(self):
        try:
            mut.Bracket.of(lambda q: q + 1.0, 0.0, 1.0)
            fail("should have thrown exception")
        except mut.DomainError as ex:
            assert "does not change sign" in ex.args[0]

    def test_reversed__rejected(self):
        with raises(mut.DomainError):
            mut.Bracket(1.0, 0.0, -1.0, 1.0)


class TestFindRoot:

    def test_linear(self):
        f = lambda q: q - 0.5  # noqa: E731
        assert abs(mut.find_root(f, mut.Bracket.of(f, 0.0, 1.0)) - 0.5) < 1e-12

    def test_log_equation(self):
        f = lambda q: math.log(q) + 1 + q  # noqa: E731
        root = mut.find_root(f, mut.Bracket.of(f, math.exp(-2), 1.0))
        assert abs(root - 0.2785) < 1e-4
        assert abs(f(root)) < 1e-10

    def test_reference_coefficients(self):
        f = lambda q: 1169.0 * q + 302.2 * (math.log(q) + 1)  # noqa: E731
        root = mut.find_root(f, mut.Bracket.of(f, 1e-12, 1.0))
        assert abs(root - 0.1821) < 1e-3

    def test_root_stays_inside_bracket(self):
        f = lambda q: q ** 3  # noqa: E731
        bracket = mut.Bracket.of(f, -1.0, 2.0)
        root = mut.find_root(f, bracket)
        assert bracket.lo <= root <= bracket.hi

    def test_endpoint_root(self):
        f = lambda q: q  # noqa: E731
        assert mut.find_root(f, mut.Bracket.of(f, 0.0, 1.0)) == 0.0

    def test_non_positive_tolerance__rejected(self):
        f = lambda q: q - 0.5  # noqa: E731
        with raises(mut.DomainError):
            mut.find_root(f, mut.Bracket.of(f, 0.0, 1.0), tol=0.0)
