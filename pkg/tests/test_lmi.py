import dataclasses
import json
from pathlib import Path

import numpy as np
from pytest import fail, fixture, raises
from scipy import linalg

import tjpy_sampled_control.lmi as mut
from tjpy_sampled_control.models import ENVELOPE_E1, LinearSampledModel, NonlinearPlanarModel, load_model
from tjpy_sampled_control.numerics import spectral_norm

FIXTURES = Path(__file__).parent / "fixtures"
TOL = mut.CERTIFICATE_TOLERANCE


def certificate(name: str) -> mut.LmiCertificate:
    return mut.load_certificate(FIXTURES / f"{name}.json")


def two_function_margins(model_name: str, cert: mut.LmiCertificate, alpha_bar_factor: float = 1.0) -> mut.LmiMargins:
    model = load_model(FIXTURES / f"{model_name}.json")
    return mut.verify_two_function_lmis(model, cert.P, cert.P_tilde, cert.alpha_bar * alpha_bar_factor,
                                         cert.scalar("alpha_b"), cert.scalar("gamma1"), cert.scalar("gamma2"))


@fixture
def rng():
    return np.random.default_rng(5)


class TestAffineMatrixMap:

    def test_evaluate(self):
        m = mut.AffineMatrixMap(np.diag([1.0, -1.0]), ((0, -np.eye(2)),), 1)
        assert np.array_equal(m([3.0]), np.diag([-2.0, -4.0]))
        assert m.order == 2

    def test_arithmetic(self):
        first = mut.AffineMatrixMap(np.eye(2), ((0, np.diag([1.0, 0.0])),), 2)
        second = mut.AffineMatrixMap(np.zeros((2, 2)), ((1, np.ones((2, 2))),), 2)
        x = np.array([2.0, -1.0])
        assert np.allclose((first + second)(x), first(x) + second(x))
        assert np.allclose((first - first)(x), 0.0)
        assert np.allclose(first.scaled(3.0)(x), 3 * first(x))

    def test_from_function(self):
        def fn(x):
            return np.array([[x[0] + 1.0, x[1]], [x[1], -2 * x[0]]])

        m = mut.AffineMatrixMap.from_function(fn, 2)
        x = np.array([0.7, -1.3])
        assert np.allclose(m(x), fn(x))
        assert len(m.coefficients) == 2

    def test_from_function__skips_unused_variables(self):
        m = mut.AffineMatrixMap.from_function(lambda x: np.array([[x[1]]]), 3)
        assert [index for index, _ in m.coefficients] == [1]

    def test_from_function__non_affine_rejected(self):
        try:
            mut.AffineMatrixMap.from_function(lambda x: np.array([[x[0] ** 2]]), 1)
            fail("should have thrown exception")
        except mut.DomainError as ex:
            assert "not affine" in ex.args[0]

    def test_block_diagonal(self):
        first = mut.AffineMatrixMap(np.eye(1), ((0, np.eye(1)),), 1)
        second = mut.AffineMatrixMap.constant(-np.eye(2), 1)
        stacked = mut.AffineMatrixMap.block_diagonal(first, second)
        assert stacked.order == 3
        assert np.array_equal(stacked([2.0]), np.diag([3.0, -1.0, -1.0]))

    def test_index_out_of_range__rejected(self):
        with raises(mut.DomainError):
            mut.AffineMatrixMap(np.eye(2), ((2, np.eye(2)),), 2)

    def test_wrong_point_size__rejected(self):
        with raises(mut.DomainError):
            mut.AffineMatrixMap(np.eye(2), (), 2)([1.0])


class TestCertificates:

    def test_two_function(self):
        cert = certificate("loop_a_certificate")
        assert cert.is_two_function
        assert not cert.is_design_form
        assert cert.scalar("gamma2") == 60.5024
        assert cert.gain() is None

    def test_design_form(self):
        cert = certificate("loop_a_design_certificate")
        assert cert.is_design_form
        assert np.allclose(cert.P, np.linalg.inv(cert.Q))
        assert np.allclose(cert.P_tilde, 7.2691 * cert.P)
        assert cert.Y.shape == (1, 2)
        assert np.allclose(cert.gain(), [[-5.5085, -0.1520]], atol=2e-3)

    def test_missing_scalar(self):
        try:
            certificate("loop_a_certificate").scalar("b")
            fail("should have thrown exception")
        except mut.FormatError as ex:
            assert "lacks the constant b" in ex.args[0]

    def test_unknown_key__rejected(self):
        try:
            mut.certificate_from_dict({"P": [[1.0]], "alpha_bar": 1.0, "rho": 2.0})
            fail("should have thrown exception")
        except mut.FormatError as ex:
            assert "unknown certificate keys: ['rho']" in ex.args[0]

    def test_incomplete_two_function__rejected(self):
        try:
            mut.certificate_from_dict({"P": [[1.0]], "alpha_bar": 1.0, "gamma1": 1.0})
            fail("should have thrown exception")
        except mut.FormatError as ex:
            assert "two-function certificate lacks ['P_tilde', 'alpha_b', 'gamma2']" in ex.args[0]

    def test_without_lyapunov_matrix__rejected(self):
        with raises(mut.FormatError):
            mut.certificate_from_dict({"alpha_bar": 1.0})

    def test_indefinite__rejected(self):
        try:
            mut.certificate_from_dict({"P": [[1.0, 0.0], [0.0, -1.0]], "alpha_bar": 1.0})
            fail("should have thrown exception")
        except mut.ValidationError as ex:
            assert ex.field_path == "P"

    def test_boolean_scalar__rejected(self):
        with raises(mut.FormatError):
            mut.certificate_from_dict({"P": [[1.0]], "alpha_bar": True})

    def test_save_and_load(self, tmp_path):
        original = certificate("planar_certificate")
        path = mut.save_certificate(original, tmp_path / "cert.json")
        loaded = mut.load_certificate(path)
        assert np.array_equal(loaded.P, original.P)
        assert np.array_equal(loaded.P_tilde, original.P_tilde)
        assert loaded.extras == original.extras
        assert json.loads(path.read_text(encoding="utf-8"))["c"] == 37.5579

    def test_invalid_json__rejected(self, tmp_path):
        path = tmp_path / "cert.json"
        path.write_text("[1, 2", encoding="utf-8")
        with raises(mut.FormatError):
            mut.load_certificate(path)


class TestVerifyLyapunovIto:

    def test_boundary(self):
        check = mut.verify_lyapunov_ito(-np.eye(2), [], np.eye(2), 1.0)
        assert check.margin == 0.0
        assert check.passed

    def test_first_subsystem_certificate(self):
        model = load_model(FIXTURES / "loop_a.json")
        cert = certificate("loop_a_certificate")
        check = mut.verify_lyapunov_ito(model.closed_loop_drift(), model.diffusion, cert.P, cert.alpha_bar)
        assert check.margin <= TOL * spectral_norm(cert.P)

    def test_lyapunov_equation_solution(self, rng):
        for _ in range(10):
            F = rng.normal(size=(3, 3))
            F = F - (np.max(np.linalg.eigvals(F).real) + 0.5) * np.eye(3)
            P = linalg.solve_continuous_lyapunov(F.T, -np.eye(3))
            alpha_bar = 1 / (2 * np.max(np.linalg.eigvalsh(P)))
            assert mut.verify_lyapunov_ito(F, [], P, alpha_bar).margin <= 1e-8

    def test_dimension_mismatch__rejected(self):
        with raises(mut.DomainError):
            mut.verify_lyapunov_ito(-np.eye(3), [], np.eye(2), 1.0)


class TestVerifyEmLmi:

    def test_boundary(self):
        assert abs(mut.verify_em_lmi(-np.eye(2), [], np.eye(2), 0.1, 0.19).margin) < 1e-12

    def test_contraction_out_of_range__rejected(self):
        for c_bar in (0.0, 1.0, 1.5):
            with raises(mut.DomainError):
                mut.verify_em_lmi(-np.eye(2), [], np.eye(2), 0.1, c_bar)

    def test_non_positive_step__rejected(self):
        with raises(mut.DomainError):
            mut.verify_em_lmi(-np.eye(2), [], np.eye(2), 0.0, 0.5)


class TestVerifyTwoFunctionLmis:

    def test_first_subsystem(self):
        assert two_function_margins("loop_a", certificate("loop_a_certificate")).accepted(TOL)

    def test_second_subsystem(self):
        assert two_function_margins("loop_b", certificate("loop_b_certificate")).accepted(TOL)

    def test_inflated_decay_rate__rejected(self):
        margins = two_function_margins("loop_a", certificate("loop_a_certificate"), alpha_bar_factor=1.5)
        assert not margins.accepted(TOL)
        assert margins.checks[0].name == "lyapunov-ito"
        assert not margins.checks[0].holds(TOL)

    def test_margins_report(self):
        margins = two_function_margins("loop_b", certificate("loop_b_certificate"))
        assert [check.name for check in margins.checks] == ["lyapunov-ito", "feedback-size", "coupling-block"]
        assert margins.worst_relative <= TOL
        assert [entry["name"] for entry in margins.to_dict()] == ["lyapunov-ito", "feedback-size", "coupling-block"]

    def test_without_held_feedback(self):
        A = np.array([[-1.0, 0.5], [0.0, -2.0]])
        model = LinearSampledModel(name="stable", A=A, B_bar=np.zeros((2, 2)))
        P = linalg.solve_continuous_lyapunov(A.T, -np.eye(2))
        alpha_bar = 1 / (2 * np.max(np.linalg.eigvalsh(P)))
        # with B̄ = 0 the block reduces to FᵀPF ⪯ γ₁γ₂P
        gamma2 = 2.0
        gamma1 = np.max(linalg.eigh(A.T @ P @ A, P, eigvals_only=True)) / gamma2 * 1.01
        margins = mut.verify_two_function_lmis(model, P, P, alpha_bar * 0.99, 1.0, gamma1, gamma2)
        assert margins.accepted()

    def test_dimension_mismatch__rejected(self):
        model = load_model(FIXTURES / "loop_a.json")
        with raises(mut.DomainError):
            mut.verify_two_function_lmis(model, np.eye(3), np.eye(3), 1.0, 1.0, 1.0, 1.0)


class TestVerifyDesignLmis:

    def test_reference_design(self):
        model = load_model(FIXTURES / "loop_a_control.json")
        cert = certificate("loop_a_design_certificate")
        margins = mut.verify_design_lmis(model, cert.Q, cert.Y, cert.alpha_bar, cert.scalar("alpha_b"),
                                         cert.scalar("gamma1"), cert.scalar("gamma2"), cert.scalar("c_tilde"))
        assert margins.accepted(TOL)

    def test_feedback_size_holds_strictly(self):
        model = load_model(FIXTURES / "loop_a_control.json")
        cert = certificate("loop_a_design_certificate")
        margins = mut.verify_design_lmis(model, cert.Q, cert.Y, cert.alpha_bar, cert.scalar("alpha_b"),
                                         cert.scalar("gamma1"), cert.scalar("gamma2"), cert.scalar("c_tilde"))
        # congruent to B̄ᵀPB̄ ⪯ ᾱ_b c̃ P for the transformed certificate
        closed = model.with_gain(cert.gain())
        transformed = mut.verify_two_function_lmis(closed, cert.P, cert.P_tilde, cert.alpha_bar, cert.scalar("alpha_b"),
                                                   cert.scalar("gamma1"), cert.scalar("gamma2"))
        assert margins.checks[1].margin < 0
        assert transformed.checks[1].margin < 0

    def test_zero_gain(self):
        model = LinearSampledModel(name="decay", A=-np.eye(2), B_hat=np.ones((2, 1)))
        margins = mut.verify_design_lmis(model, np.eye(2), np.zeros((1, 2)), 0.5, 1.0, 1.0, 1.0, 1.0)
        assert abs(margins.checks[0].margin + 1.0) < 1e-12

    def test_without_input_map__rejected(self):
        with raises(mut.DomainError):
            mut.verify_design_lmis(load_model(FIXTURES / "loop_a.json"), np.eye(2), np.zeros((1, 2)),
                                   1.0, 1.0, 1.0, 1.0, 1.0)

    def test_wrong_multiplier_shape__rejected(self):
        model = load_model(FIXTURES / "loop_a_control.json")
        with raises(mut.DomainError):
            mut.verify_design_lmis(model, np.eye(2), np.zeros((2, 2)), 1.0, 1.0, 1.0, 1.0, 1.0)


class TestVerifyPlanarLmis:

    @fixture
    def cert(self) -> mut.LmiCertificate:
        return certificate("planar_certificate")

    @fixture
    def gain(self) -> np.ndarray:
        return load_model(FIXTURES / "planar.json").K_hat

    def margins(self, gain, cert, **overrides) -> mut.LmiMargins:
        values = dict(alpha_bar=cert.alpha_bar, alpha_b=cert.scalar("alpha_b"), gamma1=cert.scalar("gamma1"),
                      gamma2=cert.scalar("gamma2"), b=cert.scalar("b"), c=cert.scalar("c"))
        values.update(overrides)
        return mut.verify_planar_lmis(gain, cert.P, cert.P_tilde, **values)

    def test_reference_certificate(self, gain, cert):
        assert self.margins(gain, cert).accepted(TOL)

    def test_inflated_decay_rate__rejected(self, gain, cert):
        assert not self.margins(gain, cert, alpha_bar=1.5 * cert.alpha_bar).accepted(TOL)

    def test_envelope_bounds_nonlinearity(self, gain, cert, rng):
        model = NonlinearPlanarModel(name="planar", K_hat=gain)
        for _ in range(100):
            x = rng.normal(size=2) * 2
            u = float(gain @ x)
            phi = model.phi(x, u)
            envelope = ENVELOPE_E1 @ x
            assert phi @ cert.P @ phi <= envelope @ cert.P @ envelope + 1e-12

    def test_margins_continuous_in_envelope_weight(self, gain, cert):
        weights = np.linspace(0.3, 0.6, 101)
        margins = np.array([self.margins(gain, cert, b=b).checks[0].margin for b in weights])
        envelope = ENVELOPE_E1.T @ cert.P @ ENVELOPE_E1
        lipschitz = spectral_norm(cert.P) + spectral_norm(envelope) / weights[0] ** 2
        assert np.all(np.abs(np.diff(margins)) <= lipschitz * (weights[1] - weights[0]) * (1 + 1e-9))

    def test_non_positive_weight__rejected(self, gain, cert):
        with raises(mut.DomainError):
            self.margins(gain, cert, b=0.0)

    def test_wrong_gain_shape__rejected(self, cert):
        with raises(mut.DomainError):
            mut.verify_planar_lmis(np.ones(3), cert.P, cert.P_tilde, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0)


class TestSolveFeasibility:

    def test_single_variable(self):
        m = mut.AffineMatrixMap(np.diag([1.0, -1.0]), ((0, -np.eye(2)),), 1)
        report = mut.solve_feasibility(m, 1e-8)
        assert report.feasible
        assert report.point[0] >= 1 + 1e-8
        assert report.margin <= -1e-8
        assert np.max(np.linalg.eigvalsh(m(report.point))) <= -1e-8

    def test_lyapunov_matrix(self):
        A = -np.eye(2)

        def fn(x):
            P = np.array([[x[0], x[1]], [x[1], x[2]]])
            return linalg.block_diag(A.T @ P + P @ A + 2 * 0.5 * P, 1e-6 * np.eye(2) - P)

        report = mut.solve_feasibility(mut.AffineMatrixMap.from_function(fn, 3))
        assert report.feasible
        P = np.array([[report.point[0], report.point[1]], [report.point[1], report.point[2]]])
        assert np.min(np.linalg.eigvalsh(P)) > 1e-6

    def test_contradiction(self):
        m = mut.AffineMatrixMap.from_function(lambda x: np.diag([1.0 - x[0], 1.0 + x[0]]), 1)
        report = mut.solve_feasibility(m)
        assert report.status is mut.SolveStatus.INFEASIBLE_JUDGED
        assert report.point is None
        assert not report.feasible

    def test_objective(self):
        m = mut.AffineMatrixMap(np.diag([1.0, -1.0]), ((0, -np.eye(2)),), 1)
        report = mut.solve_feasibility(m, 1e-6, objective=np.array([1.0]))
        assert report.feasible
        assert 1.0 < report.point[0] < 1.01

    def test_default_solver(self):
        assert mut.SolverOptions().solver == "CLARABEL"

    def test_without_variables__rejected(self):
        with raises(mut.DomainError):
            mut.solve_feasibility(mut.AffineMatrixMap.constant(-np.eye(2)))

    def test_objective_shape__rejected(self):
        m = mut.AffineMatrixMap(np.diag([1.0, -1.0]), ((0, -np.eye(2)),), 1)
        with raises(mut.DomainError):
            mut.solve_feasibility(m, objective=np.ones(2))


class TestMinimizeGevp:

    def test_fixed_matrices(self):
        result = mut.minimize_gevp(mut.AffineMatrixMap.constant(np.diag([2.0, 8.0])),
                                   mut.AffineMatrixMap.constant(np.diag([1.0, 4.0])))
        assert abs(result.lambda_ - 2.0) < 1e-12

    def test_fixed_matrices__scale_with_numerator(self):
        denominator = mut.AffineMatrixMap.constant(np.diag([1.0, 4.0]))
        for factor in (0.5, 2.0):
            numerator = mut.AffineMatrixMap.constant(factor * np.diag([2.0, 8.0]))
            assert abs(mut.minimize_gevp(numerator, denominator).lambda_ - 2.0 * factor) < 1e-8

    def test_bounded_denominator(self):
        numerator = mut.AffineMatrixMap.constant(np.eye(2), 1)
        denominator = mut.AffineMatrixMap(np.zeros((2, 2)), ((0, np.eye(2)),), 1)
        side = mut.AffineMatrixMap(-4.0 * np.eye(1), ((0, np.eye(1)),), 1)
        result = mut.minimize_gevp(numerator, denominator, side_constraints=side)
        assert abs(result.lambda_ - 0.25) < 1e-3
        assert result.point[0] <= 4.0
        assert result.iterations > 0

    def test_bounded_denominator__large_lambda(self):
        numerator = mut.AffineMatrixMap.constant(4.0 * np.eye(2), 1)
        denominator = mut.AffineMatrixMap(np.zeros((2, 2)), ((0, np.eye(2)),), 1)
        side = mut.AffineMatrixMap(-np.eye(1), ((0, np.eye(1)),), 1)
        result = mut.minimize_gevp(numerator, denominator, side_constraints=side)
        assert abs(result.lambda_ - 4.0) < 4e-3

    def test_failed_upper_end__steps_down(self, mocker):
        solve = mut.solve_feasibility
        calls = []

        def failing_first(lmi_map, strictness, **kwargs):
            calls.append(lmi_map)
            if len(calls) == 1:
                return mut.SolveReport(mut.SolveStatus.FAILED, None, 1.0, 0, "optimal")
            return solve(lmi_map, strictness, **kwargs)

        mocker.patch("tjpy_sampled_control.lmi.solve_feasibility", side_effect=failing_first)
        numerator = mut.AffineMatrixMap.constant(np.eye(2), 1)
        denominator = mut.AffineMatrixMap(np.zeros((2, 2)), ((0, np.eye(2)),), 1)
        side = mut.AffineMatrixMap(-4.0 * np.eye(1), ((0, np.eye(1)),), 1)
        result = mut.minimize_gevp(numerator, denominator, side_constraints=side)
        assert abs(result.lambda_ - 0.25) < 1e-3
        assert len(calls) > 2

    def test_never_feasible(self):
        numerator = mut.AffineMatrixMap.constant(np.eye(2), 1)
        denominator = mut.AffineMatrixMap.constant(-np.eye(2), 1)
        try:
            mut.minimize_gevp(numerator, denominator)
            fail("should have thrown exception")
        except mut.InfeasibleError as ex:
            assert "no feasible lambda" in ex.args[0]

    def test_mismatched_maps__rejected(self):
        with raises(mut.DomainError):
            mut.minimize_gevp(mut.AffineMatrixMap.constant(np.eye(2), 1), mut.AffineMatrixMap.constant(np.eye(3), 1))


def test_certificate_is_immutable():
    cert = certificate("loop_a_certificate")
    with raises(dataclasses.FrozenInstanceError):
        cert.alpha_bar = 2.0
