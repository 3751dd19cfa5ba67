"""
Command line interface: ``sampled-control {bound,verify,design,simulate,report}``.

Exit codes are shared by all commands: 0 success, 1 verified negative (FAIL or divergence),
2 infeasible, 3 input error.
"""
import argparse
import contextlib
import csv
import io
import json
import logging
import math
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from tjpy_sampled_control import __version__
from tjpy_sampled_control.bounds import (EmulationConstants, GainConstants, Provenance, SamplingBoundResult,
                                         TwoFunctionConstants, dta_bound, emulation_bound_single,
                                         emulation_bound_single_rate_form, emulation_bound_two, solve_qhat_star,
                                         tau_curve)
from tjpy_sampled_control.design import (DesignOptions, DesignResult, extract_alpha_b, extract_alpha_f,
                                         synthesize_feedback, synthesize_nonlinear_planar)
from tjpy_sampled_control.errors import (DegenerateEnsemble, DomainError, FormatError, InfeasibleError,
                                         NumericalFailure, ValidationError)
from tjpy_sampled_control.files import file_digest, write_text_atomically
from tjpy_sampled_control.lmi import (CERTIFICATE_TOLERANCE, LmiCertificate, LmiMargins, certificate_from_dict,
                                      certificate_to_dict, load_certificate, save_certificate, verify_design_lmis,
                                      verify_lyapunov_ito, verify_planar_lmis, verify_two_function_lmis)
from tjpy_sampled_control.models import (Model, NonlinearPlanarModel, load_model, model_from_dict, model_to_dict,
                                         parse_schedule)
from tjpy_sampled_control.sim import (SimConfig, estimate_as_exponent, estimate_ms_decay, run_ensemble,
                                      write_statistics_csv, write_trajectories_csv)

_logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_NEGATIVE = 1
EXIT_INFEASIBLE = 2
EXIT_INPUT = 3


class _ArgumentParser(argparse.ArgumentParser):
    def error(self, message: str):
        raise FormatError(f"{self.prog}: {message}")


@dataclass
class RunReport:
    command: str
    results: Dict[str, Any]
    argv: List[str] = field(default_factory=list)
    inputs: Dict[str, str] = field(default_factory=dict)
    """input path -> sha256 of its contents"""
    version: str = __version__
    wall_time: float = 0.0

    def to_dict(self) -> Dict[str, Any]:
        return {"command": self.command, "argv": self.argv, "inputs": self.inputs, "results": self.results,
                "version": self.version, "wall_time": self.wall_time}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, default=_json_default) + "\n"

    @classmethod
    def from_dict(cls, data: Any) -> 'RunReport':
        if not isinstance(data, dict) or "command" not in data or "results" not in data:
            raise FormatError("a run report must be a JSON object with 'command' and 'results'")
        return cls(command=data["command"], results=data["results"], argv=data.get("argv", []),
                   inputs=data.get("inputs", {}), version=data.get("version", "unknown"),
                   wall_time=data.get("wall_time", 0.0))


def load_report(path: Path) -> RunReport:
    try:
        return RunReport.from_dict(json.loads(path.read_text(encoding="utf-8")))
    except json.JSONDecodeError as ex:
        raise FormatError(f"report {str(path)} is not valid JSON: {ex}")


def _json_default(value: Any) -> Any:
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, np.generic):
        return value.item()
    raise TypeError(f"cannot serialize {type(value).__name__}")


_BOUND_FLAGS = {
    "alpha_bar": "--alpha", "alpha_b": "--alpha-b", "alpha_f": "--alpha-f", "alpha_u": "--alpha-u",
    "gamma1": "--gamma1", "gamma2": "--gamma2", "alpha1": "--alpha1", "alpha2": "--alpha2",
    "alphat1": "--alphat1", "alphat2": "--alphat2", "beta1": "--beta1", "beta2": "--beta2", "beta3": "--beta3",
    "p": "--p", "q_hat": "--q", "c_bar": "--c-bar", "h": "--h",
}


def _bound_values(args: argparse.Namespace, inputs: Dict[str, str]) -> Dict[str, float]:
    values: Dict[str, float] = {}
    if args.constants is not None:
        path = Path(args.constants)
        inputs[str(path)] = file_digest(path)
        try:
            data = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as ex:
            raise FormatError(f"constants file {str(path)} is not valid JSON: {ex}")
        if not isinstance(data, dict):
            raise FormatError("a constants file must hold a JSON object")
        for key, value in data.items():
            if key not in _BOUND_FLAGS:
                raise FormatError(f"unknown constant {key!r}, expected one of {sorted(_BOUND_FLAGS)}")
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise ValidationError(f"must be a number but is {value!r}", field_path=key)
            values[key] = float(value)
    for key in _BOUND_FLAGS:
        flag_value = getattr(args, key)
        if flag_value is not None:
            values[key] = flag_value
    return values


def _require_values(values: Dict[str, float], keys: Sequence[str], mode: str) -> List[float]:
    missing = [_BOUND_FLAGS[k] for k in keys if k not in values]
    if missing:
        raise FormatError(f"{mode} needs {', '.join(missing)}")
    return [values[k] for k in keys]


def cmd_bound(args: argparse.Namespace) -> Tuple[RunReport, int]:
    inputs: Dict[str, str] = {}
    values = _bound_values(args, inputs)
    if args.generic:
        alpha1, alphat2 = _require_values(values, ("alpha1", "alphat2"), "--generic")
        constants = GainConstants(alpha1=alpha1, alpha2=values.get("alpha2", 0.0),
                                  alphat1=values.get("alphat1", 1.0), alphat2=alphat2,
                                  beta1=values.get("beta1", 0.0), beta2=values.get("beta2", 0.0),
                                  beta3=values.get("beta3", 0.0), p=values.get("p", 2.0))
        result = solve_qhat_star(constants, q_hat=values.get("q_hat"))
    elif args.single_v:
        result = emulation_bound_single(
            EmulationConstants(*_require_values(values, ("alpha_bar", "alpha_b", "alpha_f"), "--single-v")))
    elif args.two_v:
        result = emulation_bound_two(TwoFunctionConstants(
            *_require_values(values, ("alpha_bar", "alpha_b", "gamma1", "gamma2"), "--two-v")))
    else:
        c_bar, h, alpha_u, alpha_b, alpha_f = _require_values(
            values, ("c_bar", "h", "alpha_u", "alpha_b", "alpha_f"), "--dta")
        result = dta_bound(c_bar, h, alpha_u, alpha_b, alpha_f)

    print(f"tau_max = {result.tau_max:.6g}")
    print(f"q* = {result.q_star:.10g}")
    for key in ("b1_star", "b2_star", "r_star", "q_hat_0", "alpha_bar"):
        if getattr(result, key) is not None:
            print(f"{key} = {getattr(result, key):.6g}")
    return RunReport("bound", {"bound": result.to_dict()}, inputs=inputs), EXIT_OK


def _closed_loop(model: Model, certificate: LmiCertificate) -> Model:
    if model.design_mode:
        gain = certificate.gain()
        if gain is None:
            raise ValidationError(f"model {model.name} has no gain and the certificate supplies none",
                                  field_path="K_hat")
        return model.with_gain(gain)
    return model


def verify_certificate(model: Model, certificate: LmiCertificate) -> Tuple[LmiMargins, Optional[SamplingBoundResult]]:
    """Margins of every inequality the certificate claims, and the bound it implies."""
    extras = certificate.extras
    if isinstance(model, NonlinearPlanarModel):
        closed = _closed_loop(model, certificate)
        keys = ("alpha_b", "gamma1", "gamma2", "b", "c")
        alpha_b, gamma1, gamma2, b, c = (certificate.scalar(k) for k in keys)
        if certificate.P_tilde is None:
            raise FormatError("the planar certificate lacks P_tilde")
        margins = verify_planar_lmis(closed.K_hat, certificate.P, certificate.P_tilde, certificate.alpha_bar,
                                     alpha_b, gamma1, gamma2, b, c)
        return margins, emulation_bound_two(TwoFunctionConstants(certificate.alpha_bar, alpha_b, gamma1, gamma2))

    if certificate.is_design_form and model.B_hat is not None:
        alpha_b, gamma1, gamma2, c_tilde = (certificate.scalar(k) for k in ("alpha_b", "gamma1", "gamma2", "c_tilde"))
        margins = verify_design_lmis(model, certificate.Q, certificate.Y, certificate.alpha_bar, alpha_b,
                                     gamma1, gamma2, c_tilde)
        return margins, emulation_bound_two(TwoFunctionConstants(certificate.alpha_bar, alpha_b, gamma1, gamma2))

    closed = _closed_loop(model, certificate)
    if certificate.is_two_function:
        alpha_b, gamma1, gamma2 = (certificate.scalar(k) for k in ("alpha_b", "gamma1", "gamma2"))
        margins = verify_two_function_lmis(closed, certificate.P, certificate.P_tilde, certificate.alpha_bar, alpha_b,
                                           gamma1, gamma2)
        return margins, emulation_bound_two(TwoFunctionConstants(certificate.alpha_bar, alpha_b, gamma1, gamma2))

    F = closed.closed_loop_drift()
    margins = LmiMargins((verify_lyapunov_ito(F, closed.diffusion, certificate.P, certificate.alpha_bar),))
    alpha_b = extras.get("alpha_b", extract_alpha_b(certificate.P, certificate.P, closed.closed_feedback()))
    alpha_f = extract_alpha_f(certificate.P, F, certificate.alpha_bar)
    if alpha_b <= 0 or alpha_f <= 0:
        return margins, None
    return margins, emulation_bound_single(EmulationConstants(certificate.alpha_bar, alpha_b, alpha_f))


def cmd_verify(args: argparse.Namespace) -> Tuple[RunReport, int]:
    inputs: Dict[str, str] = {}
    if args.from_report is not None:
        path = Path(args.from_report)
        inputs[str(path)] = file_digest(path)
        recorded = load_report(path).results
        if "model" not in recorded or "certificate" not in recorded:
            raise FormatError(f"report {str(path)} records no model and certificate")
        model = model_from_dict(recorded["model"])
        certificate = certificate_from_dict(recorded["certificate"])
    else:
        if args.model is None or args.cert is None:
            raise FormatError("verify needs --model and --cert, or --from-report")
        model_path, cert_path = Path(args.model), Path(args.cert)
        inputs[str(model_path)] = file_digest(model_path)
        inputs[str(cert_path)] = file_digest(cert_path)
        model = load_model(model_path)
        certificate = load_certificate(cert_path)

    margins, bound = verify_certificate(model, certificate)
    passed = margins.accepted(args.tol)
    for check in margins.checks:
        print(f"{check.name}: margin {check.margin:.6g} (relative {check.relative_margin:.3g})")
    print("PASS" if passed else "FAIL")
    results: Dict[str, Any] = {"model": model_to_dict(model), "certificate": certificate_to_dict(certificate),
                               "margins": margins.to_dict(), "passed": passed, "tol": args.tol}
    if passed and bound is not None:
        print(f"tau_max = {bound.tau_max:.6g}")
        results["bound"] = bound.to_dict()
    return RunReport("verify", results, inputs=inputs), EXIT_OK if passed else EXIT_NEGATIVE


def _c_tilde_choices(text: str) -> List[Optional[float]]:
    if text == "free":
        return [None]
    if text.startswith("sweep:"):
        try:
            choices: List[Optional[float]] = [float(v) for v in text[len("sweep:"):].split(",") if v.strip()]
        except ValueError:
            raise FormatError(f"--c-tilde '{text}' contains a non-numeric value")
        if not choices:
            raise FormatError("--c-tilde sweep needs at least one value")
        return choices
    try:
        return [float(text)]
    except ValueError:
        raise FormatError(f"--c-tilde must be a number, 'free' or 'sweep:V1,V2,...' but is '{text}'")


def cmd_design(args: argparse.Namespace) -> Tuple[RunReport, int]:
    model_path = Path(args.model)
    inputs = {str(model_path): file_digest(model_path)}
    model = load_model(model_path)

    if isinstance(model, NonlinearPlanarModel):
        result = synthesize_nonlinear_planar(model=model)
    else:
        best: Optional[DesignResult] = None
        for c_tilde in _c_tilde_choices(args.c_tilde):
            options = DesignOptions(c_tilde=c_tilde, alpha_fraction=args.alpha_fraction,
                                    search_ladder=not args.first_feasible)
            try:
                candidate = synthesize_feedback(model, options)
            except InfeasibleError as ex:
                _logger.warning(f"c_tilde={c_tilde}: {ex}")
                continue
            if best is None or candidate.bound.tau_max > best.bound.tau_max:
                best = candidate
        if best is None:
            raise InfeasibleError(f"no c_tilde in {args.c_tilde} admits a design")
        result = best

    print(f"K_hat = {result.gain.ravel().tolist()}")
    print(f"|K_hat| = {result.gain_norm:.6g}")
    print(f"c_tilde = {result.c_tilde:.6g}")
    print(f"tau_max = {result.bound.tau_max:.6g}")
    if args.cert_out is not None:
        save_certificate(result.certificate, Path(args.cert_out))
    results = {"model": model_to_dict(model.with_gain(result.gain)),
               "certificate": certificate_to_dict(result.certificate),
               "gain": result.gain.tolist(), "gain_norm": result.gain_norm, "c_tilde": result.c_tilde,
               "bound": result.bound.to_dict(), "trace": result.trace.to_dict()}
    return RunReport("design", results, inputs=inputs), EXIT_OK


def _parse_pair(text: str, flag: str) -> Tuple[float, float]:
    try:
        lo, hi = (float(v) for v in text.split(","))
    except ValueError:
        raise FormatError(f"{flag} must look like LO,HI but is '{text}'")
    return lo, hi


def cmd_simulate(args: argparse.Namespace) -> Tuple[RunReport, int]:
    model_path = Path(args.model)
    inputs = {str(model_path): file_digest(model_path)}
    model = load_model(model_path)
    if args.cert is not None:
        cert_path = Path(args.cert)
        inputs[str(cert_path)] = file_digest(cert_path)
        model = _closed_loop(model, load_certificate(cert_path))
    elif model.design_mode:
        raise ValidationError(f"model {model.name} has no gain, pass --cert", field_path="K_hat")

    schedule = parse_schedule(args.schedule)
    dt_sim = args.dt_sim if args.dt_sim is not None else schedule.underline_dt / 10
    cfg = SimConfig(schedule=schedule, dt_sim=dt_sim, horizon=args.horizon, n_paths=args.paths, seed=args.seed,
                    store_stride=args.stride, workers=args.workers)
    x0 = None
    if args.x0 is not None:
        try:
            x0 = np.array([float(v) for v in args.x0.split(",")])
        except ValueError:
            raise FormatError(f"--x0 must be comma separated numbers but is '{args.x0}'")
        if x0.shape != (model.n,):
            raise ValidationError(f"must have {model.n} entries but has {len(x0)}", field_path="x0")
    ensemble = run_ensemble(model, cfg, x0=x0)
    if args.trajectories is not None:
        write_trajectories_csv(ensemble, Path(args.trajectories))
    if args.statistics is not None:
        write_statistics_csv(ensemble, Path(args.statistics))

    results: Dict[str, Any] = {"model": model_to_dict(model), "schedule": schedule.describe(), "dt_sim": dt_sim,
                               "horizon": args.horizon, "n_paths": args.paths, "seed": args.seed,
                               "n_diverged": ensemble.n_diverged}
    window = None if args.window is None else _parse_pair(args.window, "--window")
    try:
        decay = estimate_ms_decay(ensemble, window)
        results["ms_decay"] = decay.to_dict()
        print(f"mean-square decay rate = {decay.rate:.6g} (r^2 = {decay.r_squared:.4f})")
        results["as_exponent"] = estimate_as_exponent(ensemble).to_dict()
    except DegenerateEnsemble as ex:
        results["note"] = str(ex)
        print(f"note: {ex}")
    print(f"diverged paths: {ensemble.n_diverged} of {ensemble.n_paths}")
    code = EXIT_NEGATIVE if ensemble.n_diverged > 0.5 * ensemble.n_paths else EXIT_OK
    return RunReport("simulate", results, inputs=inputs), code


def bound_from_dict(data: Dict[str, Any]) -> SamplingBoundResult:
    """Recomputes a bound from the provenance and constants recorded in a report."""
    provenance = Provenance(data["provenance"])
    constants = data["constants"]
    if provenance is Provenance.GENERIC:
        g = GainConstants(**constants)
        return solve_qhat_star(g, q_hat=data["q_star"] if data.get("iss_free") else None)
    if provenance is Provenance.TWO_V:
        return emulation_bound_two(TwoFunctionConstants(**constants))
    if provenance is Provenance.SINGLE_V:
        return emulation_bound_single(EmulationConstants(**constants))
    return emulation_bound_single_rate_form(EmulationConstants(**constants))


def _summary_row(name: str, report: RunReport) -> Dict[str, Any]:
    results = report.results
    model = results.get("model", {})
    return {"report": name, "command": report.command, "model": model.get("name", ""),
            "tau_max": results.get("bound", {}).get("tau_max", math.nan),
            "gain_norm": results.get("gain_norm", math.nan),
            "decay_rate": results.get("ms_decay", {}).get("rate", math.nan)}


def cmd_report(args: argparse.Namespace) -> Tuple[RunReport, int]:
    if not args.reports:
        raise FormatError("report needs at least one run report")
    inputs: Dict[str, str] = {}
    rows = []
    curves = []
    for name in args.reports:
        path = Path(name)
        inputs[str(path)] = file_digest(path)
        report = load_report(path)
        if report.version != __version__:
            _logger.warning(f"{name} was written by version {report.version}, this is {__version__}")
        rows.append(_summary_row(name, report))
        if report.command == "bound":
            curves.append((name, tau_curve(bound_from_dict(report.results["bound"]))))

    columns = ["report", "command", "model", "tau_max", "gain_norm", "decay_rate"]
    buffer = io.StringIO()
    writer = csv.DictWriter(buffer, fieldnames=columns, lineterminator="\n")
    writer.writeheader()
    writer.writerows(rows)
    table = buffer.getvalue()
    if args.format == "json":
        print(json.dumps(rows, indent=2))
    else:
        print(table, end="")
    if args.table is not None:
        write_text_atomically(Path(args.table), table)
    if args.curve is not None and curves:
        curve_buffer = io.StringIO()
        curve_writer = csv.writer(curve_buffer, lineterminator="\n")
        curve_writer.writerow(["report", "q", "tau"])
        for name, (qs, taus) in curves:
            for q, tau in zip(qs, taus):
                curve_writer.writerow([name, repr(float(q)), repr(float(tau))])
        write_text_atomically(Path(args.curve), curve_buffer.getvalue())
    return RunReport("report", {"rows": rows}, inputs=inputs), EXIT_OK


def _build_parser() -> argparse.ArgumentParser:
    parser = _ArgumentParser(prog="sampled-control",
                             description="Sampling bounds, LMI certificates, gain synthesis and simulation "
                                         "for sampled-data stochastic control.")
    parser.add_argument("--version", action="version", version=__version__)
    verbosity = parser.add_mutually_exclusive_group()
    verbosity.add_argument("--verbose", action="store_true")
    verbosity.add_argument("--quiet", action="store_true")
    commands = parser.add_subparsers(dest="command", parser_class=_ArgumentParser)
    commands.required = True
    shared = _ArgumentParser(add_help=False)
    shared.add_argument("--format", choices=("json", "csv"),
                        help="json prints the run report instead of text, report defaults to csv")
    shared.add_argument("--seed", type=int, default=0, help="seed of every random draw")
    shared.add_argument("--tol", type=float, default=CERTIFICATE_TOLERANCE,
                        help="relative margin tolerated per inequality")

    def add_command(name: str, handler: Callable, help_text: str) -> argparse.ArgumentParser:
        command = commands.add_parser(name, help=help_text, parents=[shared])
        command.set_defaults(handler=handler)
        command.add_argument("--out", help="write the JSON run report here")
        return command

    bound = add_command("bound", cmd_bound, "maximum allowable sampling interval from constants")
    mode = bound.add_mutually_exclusive_group(required=True)
    for flag in ("--generic", "--single-v", "--two-v", "--dta"):
        mode.add_argument(flag, action="store_true")
    bound.add_argument("--constants", help="JSON object with any of the constants below")
    for key, flag in _BOUND_FLAGS.items():
        bound.add_argument(flag, dest=key, type=float)

    verify = add_command("verify", cmd_verify, "check a certificate against a model")
    verify.add_argument("--model")
    verify.add_argument("--cert")
    verify.add_argument("--from-report", help="re-verify the model and certificate recorded in a run report")

    design = add_command("design", cmd_design, "synthesize a state-feedback gain")
    design.add_argument("--model", required=True)
    design.add_argument("--c-tilde", default="1.0", help="NUMBER, 'free' or 'sweep:V1,V2,...'")
    design.add_argument("--alpha-fraction", type=float, default=0.9)
    design.add_argument("--first-feasible", action="store_true", help="stop at the first feasible decay rate")
    design.add_argument("--cert-out", help="write the certificate here")

    simulate = add_command("simulate", cmd_simulate, "Monte Carlo simulation of the sampled closed loop")
    simulate.add_argument("--model", required=True)
    simulate.add_argument("--cert", help="certificate supplying the gain")
    simulate.add_argument("--schedule", required=True, help="periodic:DT, uniform:LO,HI or explicit:T1,T2,...")
    simulate.add_argument("--paths", type=int, default=100)
    simulate.add_argument("--horizon", type=float, default=5.0)
    simulate.add_argument("--dt-sim", type=float)
    simulate.add_argument("--workers", type=int, default=1)
    simulate.add_argument("--stride", type=int, default=1)
    simulate.add_argument("--x0")
    simulate.add_argument("--window", help="LO,HI of the decay fit, default [0.2 horizon, horizon]")
    simulate.add_argument("--trajectories", help="CSV file for all stored paths")
    simulate.add_argument("--statistics", help="CSV file for the mean square norm")

    report = add_command("report", cmd_report, "merge run reports into a summary table")
    report.add_argument("reports", nargs="*")
    report.add_argument("--table", help="CSV file for the merged table")
    report.add_argument("--curve", help="CSV file for the tau(q) curves of bound reports")
    return parser


def _configure_logging(args: argparse.Namespace):
    level = logging.DEBUG if args.verbose else logging.WARNING if args.quiet else logging.INFO
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")


def main(argv: Optional[Sequence[str]] = None) -> int:
    arguments = list(sys.argv[1:] if argv is None else argv)
    started = time.perf_counter()
    try:
        args = _build_parser().parse_args(arguments)
        _configure_logging(args)
        if args.format == "json" and args.command != "report":
            with contextlib.redirect_stdout(io.StringIO()):
                report, code = args.handler(args)
        else:
            report, code = args.handler(args)
    except (FormatError, ValidationError, DomainError, FileNotFoundError) as ex:
        print(f"error: {ex}", file=sys.stderr)
        return EXIT_INPUT
    except (InfeasibleError, NumericalFailure) as ex:
        print(f"infeasible: {ex}", file=sys.stderr)
        return EXIT_INFEASIBLE
    report.argv = arguments
    report.wall_time = time.perf_counter() - started
    _logger.info(f"{args.command} finished in {report.wall_time:.3g}s with exit code {code}")
    if args.out is not None:
        write_text_atomically(Path(args.out), report.to_json())
    if args.format == "json" and args.command != "report":
        print(report.to_json(), end="")
    return code
