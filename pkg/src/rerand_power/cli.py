"""Command-line interface: ``rerand-power <command> [flags]``.

Exit codes: 0 success, 1 usage error, 2 domain error, 3 validation failure.
"""

from __future__ import annotations

import argparse
import math
import sys
from typing import Any, Sequence

import numpy as np

from . import __version__
from .calculators import (
    MonteCarloSettings,
    PowerQuery,
    SampleSizeQuery,
    power_rand,
    power_rerand,
    sample_size_warnings,
    samplesize_rand,
    samplesize_rerand,
)
from .errors import RerandPowerError
from .mixture import DEFAULT_DRAWS, DEFAULT_SEED, TruncationSpec
from .moments import DesignSpec, OutcomeMoments
from .records import OutputRecord
from .tables import DEFAULT_KS, DEFAULT_R2S, curves_to_csv, power_curve, sweep_ratio

EXIT_OK, EXIT_USAGE, EXIT_DOMAIN, EXIT_VALIDATION = 0, 1, 2, 3

_METHODS = {"mc": "monte_carlo", "int": "integration"}
_OUTPUT_KEYS = {"command", "json", "csv", "out", "func"}


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # usage errors exit with 1, not argparse's 2
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


class _UsageError(Exception):
    pass


def _float_list(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _int_list(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _grid(text: str) -> list[float]:
    """``start:stop:count`` (inclusive) or a comma-separated list."""
    if ":" in text:
        try:
            lo, hi, count = text.split(":")
            return list(np.linspace(float(lo), float(hi), int(count)))
        except ValueError:
            raise argparse.ArgumentTypeError(f"expected start:stop:count, got {text!r}") from None
    return _float_list(text)


# ----------------------------------------------------------------------------
# argument groups
# ----------------------------------------------------------------------------


def _add_output(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("output")
    fmt = g.add_mutually_exclusive_group()
    fmt.add_argument("--json", action="store_true", help="print a JSON record")
    fmt.add_argument("--csv", action="store_true", help="print CSV with a header row")
    g.add_argument("--out", help="write output to this file instead of stdout")


def _add_mc(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("mixture quantiles")
    g.add_argument("--method", choices=sorted(_METHODS), default="mc", help="Monte Carlo or numerical integration")
    g.add_argument("--draws", type=int, default=DEFAULT_DRAWS, help="Monte Carlo draws (default %(default)s)")
    g.add_argument("--seed", type=int, default=DEFAULT_SEED, help="Monte Carlo seed (default %(default)s)")


def _add_design(p: argparse.ArgumentParser, rerand: bool, samplesize: bool) -> None:
    g = p.add_argument_group("design")
    g.add_argument("--n1", type=int, help="treated units")
    g.add_argument("--n0", type=int, help="control units")
    if not samplesize:
        g.add_argument("--n", type=int, help="total units (with --p1)")
    g.add_argument("--p1", type=float, help="treated proportion (default 0.5)")
    g.add_argument("--alpha", type=float, default=0.05, help="one-sided level (default %(default)s)")
    g.add_argument("--estimator", choices=("neyman", "dfm"), default="neyman")
    o = p.add_argument_group("outcomes")
    o.add_argument("--s1", type=float, required=True, help="SD of treated potential outcomes")
    o.add_argument("--s0", type=float, required=True, help="SD of control potential outcomes")
    o.add_argument("--s-tau", type=float, default=0.0, help="SD of unit-level effects (default 0)")
    o.add_argument("--s-tau-x", type=float, default=0.0, help="SD of the covariate-explained effect part (default 0)")
    o.add_argument("--tau", type=float, required=True, help="average treatment effect")
    if samplesize:
        o.add_argument("--power", type=float, required=True, help="target power")
    if rerand:
        r = p.add_argument_group("rerandomization")
        r.add_argument("--k", type=int, required=True, help="number of covariates")
        crit = r.add_mutually_exclusive_group(required=True)
        crit.add_argument("--pa", type=float, help="acceptance probability")
        crit.add_argument("--a", type=float, help="Mahalanobis threshold")
        r.add_argument("--r2", type=float, required=True, help="squared multiple correlation with covariates")
        _add_mc(p)


def _trunc(args) -> TruncationSpec:
    if args.pa is not None:
        return TruncationSpec.from_acceptance(args.k, args.pa)
    return TruncationSpec.from_threshold(args.k, args.a)


def _mc(args) -> MonteCarloSettings:
    return MonteCarloSettings(_METHODS[args.method], args.draws, args.seed)


def _design(args, rerand: bool, need_n: bool) -> DesignSpec:
    trunc = _trunc(args) if rerand else TruncationSpec.unconstrained(1)
    common = dict(trunc=trunc, alpha=args.alpha, estimator=args.estimator)
    counts = (args.n1, args.n0)
    if any(c is not None for c in counts):
        if None in counts:
            raise _UsageError("--n1 and --n0 go together")
        if args.p1 is not None or getattr(args, "n", None) is not None:
            raise _UsageError("give either --n1/--n0 or --n/--p1, not both")
        return DesignSpec.from_counts(args.n1, args.n0, **common)
    n = getattr(args, "n", None)
    if need_n and n is None:
        raise _UsageError("give --n1 and --n0, or --n (with optional --p1)")
    p1 = 0.5 if args.p1 is None else args.p1
    return DesignSpec(p1=p1, n=n, **common)


def _moments(args) -> OutcomeMoments:
    r2 = getattr(args, "r2", 0.0)
    return OutcomeMoments.from_sd(args.s1, args.s0, args.s_tau, args.s_tau_x, r2)


def _inputs(args) -> dict[str, Any]:
    return {k: v for k, v in sorted(vars(args).items()) if k not in _OUTPUT_KEYS and v is not None}


def _mc_record(mc: MonteCarloSettings) -> dict[str, Any]:
    return {"method": mc.method, "draws": mc.draws, "seed": mc.seed}


# ----------------------------------------------------------------------------
# commands
# ----------------------------------------------------------------------------


def _emit_scalar(args, record: OutputRecord, text: str, csv_row: dict[str, Any]) -> str:
    if args.json:
        return record.to_json() + "\n"
    if args.csv:
        return ",".join(csv_row) + "\n" + ",".join(repr(v) if isinstance(v, float) else str(v) for v in csv_row.values()) + "\n"
    return text + "\n"


def _cmd_power(args, rerand: bool) -> tuple[str, int]:
    design = _design(args, rerand, need_n=True)
    q = PowerQuery(_moments(args), design, args.tau, design.n)
    mc = _mc(args) if rerand else None
    res = power_rerand(q, mc) if rerand else power_rand(q)
    record = OutputRecord(
        command=args.command,
        inputs=_inputs(args),
        result={"power": res.power, "quantile": res.quantile_used, "v": res.summary.v,
                "v_tilde": res.summary.v_tilde, "r2_tilde": res.summary.r2_tilde},
        mc=_mc_record(mc) if mc else None,
        warnings=list(res.warnings),
    )
    return _emit_scalar(args, record, format(res.power, ".7g"), {"power": res.power}), EXIT_OK


def _cmd_samplesize(args, rerand: bool) -> tuple[str, int]:
    design = _design(args, rerand, need_n=False)
    m = _moments(args)
    q = SampleSizeQuery(m, design, args.tau, args.power)
    mc = _mc(args) if rerand else None
    n = samplesize_rerand(q, mc) if rerand else samplesize_rand(q)
    ceiling = math.ceil(n - 1e-9)
    warnings = list(sample_size_warnings(m, design, args.power))
    record = OutputRecord(
        command=args.command,
        inputs=_inputs(args),
        result={"n": n, "n_ceiling": ceiling},
        mc=_mc_record(mc) if mc else None,
        warnings=warnings,
    )
    for w in warnings:
        print(f"warning: {w}", file=sys.stderr)
    text = f"{n:.7g} (ceiling {ceiling})"
    return _emit_scalar(args, record, text, {"n": n, "n_ceiling": ceiling}), EXIT_OK


def _cmd_sweep(args) -> tuple[str, int]:
    mc = _mc(args)
    table = sweep_ratio(
        ks=args.ks, r2s=args.r2s, pas=args.pas, s_taus=args.s_taus, s1=args.s1, s0=args.s0,
        p1=args.p1, gamma=args.power, alpha=args.alpha, estimator=args.estimator, mc=mc,
    )
    summary: dict[str, Any] = {}
    base_s_tau = args.s_taus[0]
    first = [r for r in table.rows if r.s_tau == base_s_tau]
    summary["median_all"] = table.median(lambda r: r.s_tau == base_s_tau)
    sub = [r for r in first if r.r2 >= args.sub_r2_min and r.k <= args.sub_k_max]
    if sub:
        summary["median_subgrid"] = table.median(
            lambda r: r.s_tau == base_s_tau and r.r2 >= args.sub_r2_min and r.k <= args.sub_k_max
        )
    for s_tau in args.s_taus[1:]:
        summary[f"inflation_s_tau_{s_tau:g}"] = table.inflation(s_tau, base_s_tau)
    if args.json:
        record = OutputRecord(
            command=args.command,
            inputs=_inputs(args),
            result={"summary": summary, "rows": [r.__dict__ for r in table.rows]},
            mc=_mc_record(mc),
        )
        return record.to_json() + "\n", EXIT_OK
    lines = [f"# {k} = {v:.6g}" for k, v in summary.items()]
    lines.insert(0, f"# sub-grid: r2 >= {args.sub_r2_min:g}, k <= {args.sub_k_max}, s_tau = {base_s_tau:g}")
    block = "\n".join(lines) + "\n"
    if args.out:
        print(block, end="", file=sys.stderr)
        return table.to_csv(), EXIT_OK
    return table.to_csv() + block, EXIT_OK


def _cmd_curve(args) -> tuple[str, int]:
    mc = _mc(args)
    trunc = TruncationSpec.from_threshold(args.k, 0.0 if args.a is None else args.a) if args.pa is None \
        else TruncationSpec.from_acceptance(args.k, args.pa)
    curves = [power_curve(vt, args.v, args.r2, trunc, args.alpha, args.tau_grid, mc) for vt in args.v_tilde]
    summary = {
        f"v_tilde_{c.v_tilde:g}": {"threshold": c.threshold, "crossing": c.crossing} for c in curves
    }
    if args.json:
        record = OutputRecord(
            command=args.command,
            inputs={k: (list(map(float, v)) if isinstance(v, list) else v) for k, v in _inputs(args).items()},
            result={"summary": summary, "rows": [r.__dict__ for c in curves for r in c.rows]},
            mc=_mc_record(mc),
        )
        return record.to_json() + "\n", EXIT_OK
    lines = []
    for c in curves:
        crossing = "none" if c.crossing is None else f"{c.crossing:.6g}"
        lines.append(f"# v_tilde = {c.v_tilde:g}: threshold = {c.threshold:.6g}, crossing = {crossing}")
    block = "\n".join(lines) + "\n"
    if args.out:
        print(block, end="", file=sys.stderr)
        return curves_to_csv(curves), EXIT_OK
    return curves_to_csv(curves) + block, EXIT_OK


def _cmd_validate(args) -> tuple[str, int]:
    from .validate import run_scenario

    mc = MonteCarloSettings("monte_carlo", args.draws, args.seed)
    kwargs = dict(replications=args.replications, seed=args.seed, n=args.n)
    if args.scenario in ("appendix-j-rerand", "shape"):
        kwargs["mc"] = mc
    if args.scenario == "dispersive":
        kwargs = dict(seed=args.seed, draws=args.draws)
    report = run_scenario(args.scenario, **kwargs)
    code = EXIT_OK if report.passed else EXIT_VALIDATION
    if args.json:
        record = OutputRecord(
            command=args.command,
            inputs=_inputs(args),
            result={
                "scenario": report.scenario,
                "passed": report.passed,
                "settings": report.settings,
                "extras": report.extras,
                "checks": [
                    {"name": c.name, "observed": c.observed, "relation": c.relation,
                     "bound": c.bound, "margin": c.margin, "passed": c.passed}
                    for c in report.checks
                ],
            },
            mc=_mc_record(mc),
        )
        return record.to_json() + "\n", code
    status = "PASS" if report.passed else "FAIL"
    extras = ", ".join(f"{k} = {v:.6g}" if isinstance(v, float) else f"{k} = {v}" for k, v in report.extras.items())
    return f"{report.scenario}: {status}\n{report.table()}\n{extras}\n", code


# ----------------------------------------------------------------------------
# parser
# ----------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="rerand-power", description="Power and sample size under rerandomization.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")

    for name, rerand, ss, helptext in (
        ("power-rand", False, False, "power under complete randomization"),
        ("power-rerand", True, False, "power under rerandomization"),
        ("samplesize-rand", False, True, "sample size under complete randomization"),
        ("samplesize-rerand", True, True, "sample size under rerandomization"),
    ):
        p = sub.add_parser(name, help=helptext, description=helptext)
        _add_design(p, rerand, ss)
        _add_output(p)
        if ss:
            p.set_defaults(func=lambda a, r=rerand: _cmd_samplesize(a, r))
        else:
            p.set_defaults(func=lambda a, r=rerand: _cmd_power(a, r))

    p = sub.add_parser("sweep-ratio", help="N_rr / N_cr over a grid", description="Sample-size ratio grid as CSV.")
    p.add_argument("--ks", type=_int_list, default=list(DEFAULT_KS), help="covariate counts (comma-separated)")
    p.add_argument("--r2s", type=_float_list, default=list(DEFAULT_R2S), help="R^2 values (comma-separated)")
    p.add_argument("--pas", type=_float_list, default=[0.001], help="acceptance probabilities")
    p.add_argument("--s-taus", type=_float_list, default=[0.0],
                   help="effect SDs; inflation is reported against the first")
    p.add_argument("--s1", type=float, default=4.0)
    p.add_argument("--s0", type=float, default=4.0)
    p.add_argument("--p1", type=float, default=0.5)
    p.add_argument("--power", type=float, default=0.8)
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--estimator", choices=("neyman", "dfm"), default="neyman")
    p.add_argument("--sub-r2-min", type=float, default=0.3, help="summary sub-grid: smallest R^2")
    p.add_argument("--sub-k-max", type=int, default=50, help="summary sub-grid: largest K")
    _add_mc(p)
    _add_output(p)
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("power-curve", help="power of both designs along the scaled effect",
                       description="Power curves as CSV; the default criterion is a = 0 (closed form).")
    p.add_argument("--v", type=float, default=1.0, help="true variance V")
    p.add_argument("--v-tilde", type=_float_list, default=[1.0, 1.1, 10.0], help="variance limits (comma-separated)")
    p.add_argument("--r2", type=float, default=0.5)
    p.add_argument("--tau-grid", type=_grid, default=list(np.linspace(0.0, 5.0, 51)),
                   help="scaled effects tau*sqrt(N/V): start:stop:count or a list")
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--k", type=int, default=1)
    crit = p.add_mutually_exclusive_group()
    crit.add_argument("--pa", type=float)
    crit.add_argument("--a", type=float, help="threshold (default 0)")
    _add_mc(p)
    _add_output(p)
    p.set_defaults(func=_cmd_curve)

    from .validate import SCENARIOS

    p = sub.add_parser("validate", help="simulator against analytic results",
                       description="Run a named simulation scenario; exit 3 when it fails.")
    p.add_argument("--scenario", required=True, choices=sorted(SCENARIOS))
    p.add_argument("--replications", type=int)
    p.add_argument("--n", type=int, help="population size")
    p.add_argument("--draws", type=int, default=DEFAULT_DRAWS)
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    _add_output(p)
    p.set_defaults(func=_cmd_validate)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        text, code = args.func(args)
        if args.out:
            with open(args.out, "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
        else:
            sys.stdout.write(text)
    except _UsageError as exc:
        parser.error(str(exc))
    except (RerandPowerError, OSError) as exc:
        print(f"rerand-power: error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    return code


if __name__ == "__main__":
    sys.exit(main())
