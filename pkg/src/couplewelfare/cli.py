"""Command-line batch runner.

Subcommands: gen-pop, impute, rates, welfare, counterfactual, hsv,
report.  All outputs are plain CSV written atomically (temp file +
rename) so failed runs never leave partial artifacts; numbers are
formatted to 6 significant digits unless --full-precision is given.
Outputs are byte-identical across runs and --threads settings.
"""

from __future__ import annotations

import argparse
import csv
import os
import sys
import tempfile
from pathlib import Path

import numpy as np

from . import _backend
from .errors import (
    Collinear,
    CoupleWelfareError,
    DenominatorUnderflow,
    NoConvergence,
    NoVariation,
    SchemaError,
    SingularSystem,
)
from .heckman import HeckmanSpec, heckman_impute
from .hsv import linearization_bias, load_economy, mdwl, mdwl_numeric
from .population import (
    ImputedCouple,
    PopulationConfig,
    export_population,
    generate_synthetic,
    import_population,
)
from .reform import (
    CounterfactualSpec,
    rate_changes,
    run_counterfactual,
    run_reform,
    scenario_from_file,
)
from .welfare import (
    ElasticityProfile,
    QUINTILE_ETAS,
    distribution_stats,
    representative_couple,
    representative_inputs,
)

_ERROR_CODES = {
    SchemaError: "E_SCHEMA",
    NoVariation: "E_NO_VARIATION",
    Collinear: "E_COLLINEAR",
    NoConvergence: "E_NO_CONVERGENCE",
    DenominatorUnderflow: "E_DENOMINATOR",
    SingularSystem: "E_SINGULAR",
    FileNotFoundError: "E_MISSING_INPUT",
}


def builtin_elasticity_profiles() -> dict[str, ElasticityProfile]:
    """Named elasticity parameterizations (eps_m, eps_f, eps_mf, eps_fm, eta)."""
    return {
        "baseline": ElasticityProfile(0.05, 0.1, -0.05, -0.1, 0.6),
        "upper": ElasticityProfile(0.1, 0.2, 0.0, -0.05, 0.8),
        "lower": ElasticityProfile(0.0, 0.1, -0.1, -0.15, 0.4),
        "high": ElasticityProfile(0.1, 0.2, -0.1, -0.15, 0.8),
        "low": ElasticityProfile(0.0, 0.1, 0.0, -0.05, 0.4),
        "quintile": ElasticityProfile(0.05, 0.1, -0.05, -0.1, QUINTILE_ETAS),
        # variant with the wife's intensive elasticity at 0.15; shipped
        # alongside baseline because published parameter listings differ
        "table1-notes": ElasticityProfile(0.05, 0.15, -0.05, -0.1, 0.6),
    }


def resolve_elasticities(name_or_path: str) -> ElasticityProfile:
    profiles = builtin_elasticity_profiles()
    if name_or_path in profiles:
        return profiles[name_or_path]
    path = Path(name_or_path)
    if path.exists():
        import json

        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
        try:
            eta = doc["eta"]
            return ElasticityProfile(
                eps_m=float(doc["eps_m"]),
                eps_f=float(doc["eps_f"]),
                eps_mf=float(doc["eps_mf"]),
                eps_fm=float(doc["eps_fm"]),
                eta=tuple(eta) if isinstance(eta, list) else float(eta),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise SchemaError(f"invalid elasticity file {path}: {exc}") from exc
    raise SchemaError(
        f"unknown elasticity profile {name_or_path!r} "
        f"(builtins: {', '.join(sorted(profiles))})"
    )


# ---------------------------------------------------------------------------
# output helpers
# ---------------------------------------------------------------------------

def _fmt(value, full_precision: bool) -> str:
    if value is None:
        return ""
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, float):
        return repr(value) if full_precision else format(value, ".6g")
    return str(value)


def write_csv(path: Path, header, rows, full_precision: bool = False) -> None:
    """Write a CSV atomically: temp file in the target directory, then rename."""
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(header)
            for row in rows:
                writer.writerow([_fmt(v, full_precision) for v in row])
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _load_imputed(args) -> list[ImputedCouple]:
    pop = import_population(args.population)
    _, imputed = heckman_impute(pop, HeckmanSpec())
    return imputed


def _welfare_outputs(args, decomp, rep_value, name: str) -> None:
    out = Path(args.out_dir)
    fp = args.full_precision
    mech = decomp.mechanical_reduction
    write_csv(
        out / f"{name}_welfare.csv",
        [
            "intensive_m", "intensive_f", "extensive_f", "cross",
            "total_wo_ce", "total", "rc", "mech_reduction_pct", "per_dollar",
        ],
        [[
            decomp.intensive_m, decomp.intensive_f, decomp.extensive_f,
            decomp.cross_effects, decomp.total_without_cross, decomp.total,
            rep_value,
            None if mech is None else 100.0 * mech,
            decomp.per_dollar,
        ]],
        fp,
    )


def _distribution_outputs(args, decomp, pop, name: str) -> None:
    out = Path(args.out_dir)
    fp = args.full_precision
    pop = sorted(pop, key=lambda c: c.base.id)
    weights = [c.base.weight for c in pop]
    stats = distribution_stats(decomp.per_couple_gains, weights)
    write_csv(
        out / f"{name}_distribution.csv",
        ["P10", "P25", "P50", "P75", "P90", "winners", "losers", "neutral"],
        [[
            stats.percentiles["P10"], stats.percentiles["P25"],
            stats.percentiles["P50"], stats.percentiles["P75"],
            stats.percentiles["P90"], stats.winners, stats.losers, stats.neutral,
        ]],
        fp,
    )
    write_csv(
        out / f"{name}_gains.csv",
        ["id", "gain_pct_own_income"],
        [
            [c.base.id, 100.0 * g]
            for c, g in zip(pop, decomp.per_couple_gains)
        ],
        fp,
    )


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def _cmd_gen_pop(args) -> None:
    config = PopulationConfig(n=args.size)
    pop = generate_synthetic(config, args.seed)
    Path(args.out_dir).mkdir(parents=True, exist_ok=True)
    target = Path(args.out_dir) / "population.csv"
    fd, tmp = tempfile.mkstemp(dir=target.parent, suffix=".tmp")
    os.close(fd)
    try:
        export_population(pop, tmp)
        os.replace(tmp, target)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    print(f"wrote {target} ({len(pop)} couples)")


def _cmd_impute(args) -> None:
    pop = import_population(args.population)
    estimate, imputed = heckman_impute(pop, HeckmanSpec())
    out = Path(args.out_dir)
    fp = args.full_precision
    write_csv(
        out / "imputed.csv",
        ["id", "potential_earnings_f", "participation_prob"],
        [
            [c.base.id, c.potential_earnings_f, c.participation_prob]
            for c in sorted(imputed, key=lambda c: c.base.id)
        ],
        fp,
    )
    coef_rows = [
        ["probit", n, b, s]
        for n, b, s in zip(
            estimate.probit_names, estimate.probit_coefficients, estimate.probit_se
        )
    ]
    coef_rows += [
        ["wage", n, b, s]
        for n, b, s in zip(
            estimate.wage_names, estimate.wage_coefficients, estimate.wage_se
        )
    ]
    coef_rows.append(["wage", "mills", estimate.mills_coefficient, estimate.mills_se])
    write_csv(
        out / "coefficients.csv",
        ["stage", "term", "estimate", "se"],
        coef_rows,
        fp,
    )
    print(f"imputed {estimate.n_total - estimate.n_working} non-working wives")


def _cmd_rates(args) -> None:
    scenario = scenario_from_file(args.scenario, args.schedule_dir)
    imputed = _load_imputed(args)
    imputed = sorted(imputed, key=lambda c: c.base.id)
    rates = rate_changes(imputed, scenario)
    write_csv(
        Path(args.out_dir) / f"{scenario.name}_rates.csv",
        ["id", "tau_m", "tau_f", "a", "d_tau_m", "d_tau_f", "d_a"],
        [
            [c.base.id, r.tau_m, r.tau_f, r.a, r.d_tau_m, r.d_tau_f, r.d_a]
            for c, r in zip(imputed, rates)
        ],
        args.full_precision,
    )


def _cmd_welfare(args) -> None:
    scenario = scenario_from_file(args.scenario, args.schedule_dir)
    el = resolve_elasticities(args.elasticities)
    imputed = _load_imputed(args)
    decomp = run_reform(imputed, scenario, el)
    rates = rate_changes(imputed, scenario)
    rep = None
    if not el.quintile_varying:
        bundle, s_m, s_f = representative_inputs(imputed, rates)
        rep = representative_couple(bundle, s_m, s_f, el)
    _welfare_outputs(args, decomp, rep, scenario.name)
    _distribution_outputs(args, decomp, imputed, scenario.name)


def _cmd_counterfactual(args) -> None:
    spec = CounterfactualSpec(
        population_year=args.population_year,
        pre_law_year=args.pre_law_year,
        post_law_year=args.post_law_year,
        mode=args.mode,
    )
    el = resolve_elasticities(args.elasticities)
    imputed = _load_imputed(args)
    name = f"cf_{spec.population_year}_{spec.pre_law_year}_{spec.post_law_year}"
    decomp = run_counterfactual(spec, imputed, el, schedule_dir=args.schedule_dir)
    _welfare_outputs(args, decomp, None, name)
    _distribution_outputs(args, decomp, imputed, name)


def _cmd_hsv(args) -> None:
    econ = load_economy(args.economy)
    fp = args.full_precision
    rows = []
    for i, draw in enumerate(econ.draws):
        true = mdwl(econ, draw)
        lin = mdwl(econ, draw, linearized=True)
        rows.append([i, true, lin, lin / true - 1.0])
    agg_true = mdwl(econ)
    agg_lin = mdwl(econ, linearized=True)
    rows.append(["aggregate", agg_true, agg_lin, agg_lin / agg_true - 1.0])
    write_csv(
        Path(args.out_dir) / "hsv_bias.csv",
        ["draw", "mdwl", "mdwl_linearized", "bias"],
        rows,
        fp,
    )
    expected = linearization_bias(econ.theta, econ.sigma)
    print(f"theta/sigma = {expected:.6g}")
    if args.verify_numeric:
        draw = econ.draws[0]
        num_true = mdwl_numeric(econ, draw)
        num_lin = mdwl_numeric(econ, draw, linearized=True)
        print(f"numeric-oracle bias (draw 0) = {num_lin / num_true - 1.0:.6g}")


def _cmd_report(args) -> None:
    el = resolve_elasticities(args.elasticities)
    imputed = _load_imputed(args)
    rows = []
    for scen_path in args.scenario:
        scenario = scenario_from_file(scen_path, args.schedule_dir)
        decomp = run_reform(imputed, scenario, el)
        mech = decomp.mechanical_reduction
        rows.append([
            scenario.name, decomp.intensive_m, decomp.intensive_f,
            decomp.extensive_f, decomp.cross_effects,
            decomp.total_without_cross, decomp.total,
            None if mech is None else 100.0 * mech,
            decomp.per_dollar,
        ])
    write_csv(
        Path(args.out_dir) / "report.csv",
        [
            "scenario", "intensive_m", "intensive_f", "extensive_f", "cross",
            "total_wo_ce", "total", "mech_reduction_pct", "per_dollar",
        ],
        rows,
        args.full_precision,
    )


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="couplewelfare",
        description="Welfare analysis of labor-income tax reforms on couples.",
    )
    parser.add_argument("--threads", type=int, default=1, help="worker thread count")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, population=True, scenario=False, elasticities=False):
        p.add_argument("--out-dir", required=True)
        p.add_argument("--schedule-dir", default=None)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--full-precision", action="store_true")
        if population:
            p.add_argument("--population", required=True)
        if scenario:
            p.add_argument("--scenario", required=True)
        if elasticities:
            p.add_argument("--elasticities", default="baseline")

    p = sub.add_parser("gen-pop", help="generate a synthetic population CSV")
    common(p, population=False)
    p.add_argument("--size", type=int, default=5000)
    p.set_defaults(func=_cmd_gen_pop)

    p = sub.add_parser("impute", help="selection-corrected imputation")
    common(p)
    p.set_defaults(func=_cmd_impute)

    p = sub.add_parser("rates", help="per-couple effective rates for a scenario")
    common(p, scenario=True)
    p.set_defaults(func=_cmd_rates)

    p = sub.add_parser("welfare", help="welfare decomposition for a scenario")
    common(p, scenario=True, elasticities=True)
    p.set_defaults(func=_cmd_welfare)

    p = sub.add_parser("counterfactual", help="cross-year counterfactual run")
    common(p, elasticities=True)
    p.add_argument("--population-year", type=int, required=True)
    p.add_argument("--pre-law-year", type=int, required=True)
    p.add_argument("--post-law-year", type=int, required=True)
    p.add_argument(
        "--mode",
        choices=["distribution-only", "distribution-and-law"],
        default="distribution-only",
    )
    p.set_defaults(func=_cmd_counterfactual)

    p = sub.add_parser("hsv", help="log-linear tax bias verification")
    common(p, population=False)
    p.add_argument("--economy", required=True)
    p.add_argument("--verify-numeric", action="store_true")
    p.set_defaults(func=_cmd_hsv)

    p = sub.add_parser("report", help="combined welfare table across scenarios")
    common(p, elasticities=True)
    p.add_argument("--scenario", action="append", required=True)
    p.set_defaults(func=_cmd_report)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.schedule_dir is None:
        args.schedule_dir = os.environ.get("COUPLEWELFARE_SCHEDULE_DIR")
    _backend.set_num_threads(args.threads)
    try:
        args.func(args)
    except tuple(_ERROR_CODES) as exc:
        code = _ERROR_CODES[type(exc)]
        for klass, c in _ERROR_CODES.items():
            if isinstance(exc, klass):
                code = c
                break
        print(f"error: {code}: {exc}", file=sys.stderr)
        return 2
    except CoupleWelfareError as exc:
        print(f"error: E_RUNTIME: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
