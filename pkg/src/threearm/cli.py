"""Command-line interface: ``threearm {analyze,design,simulate,reproduce}``.

Inputs come from three layers, later ones winning: scenario presets
(``--scenario``), a flat ``key = value`` config file (``--config``) and
explicit flags. ``--dump-config PATH`` writes the merged inputs back out in
the config format, so a run can be repeated with ``--config PATH`` alone.

Exit codes: 0 on a clean run (whatever the verdicts), 2 for invalid input,
3 for numerical failures (root not bracketed, target power unreachable).
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from pathlib import Path

from . import reproduce as repro
from .design import (
    ANALYTIC,
    QUADRATURE,
    DEFAULT_N_CAP,
    EffectScenario,
    MixtureScenario,
    MonteCarlo,
    TargetUnreachableError,
    default_mode,
    optimize_allocation,
    required_total_n,
)
from .sci import DesignParams, Method, RhoConvention, TrialData, analyze
from .simulate import SimulationConfig, run_simulation, summaries_to_csv
from .stats import NoSignChangeError, RootNotConvergedError

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC = 0, 2, 3

# config key -> parser
_FLOAT_KEYS = ("alpha", "delta0", "delta1", "r", "mu_r_hist", "q", "sigma", "sd_e", "sd_r",
               "sd_p", "effect_ep", "effect_rp", "target_power", "x_e", "x_r", "x_p")
_INT_KEYS = ("n_e", "n_r", "n_p", "reps", "seed")
_LIST_KEYS = ("v_list", "weights")
_STR_KEYS = ("method", "output_format")
CONFIG_KEYS = _FLOAT_KEYS + _INT_KEYS + _LIST_KEYS + _STR_KEYS

FORMATS = ("text", "csv", "json")
ALL = "all"

# presets for the worked scenarios (effect_EP = 1, sigma = 2, mu_R_hist = 1)
_PRESET_COMMON = dict(alpha=0.025, delta0=0.5, delta1=0.5, q=0.01, sigma=2.0,
                      effect_ep=1.0, mu_r_hist=1.0, target_power=0.9)
_PRESET_SIZES = {1: (356, 348, 145), 2: (227, 75, 285), 3: (306, 33, 325)}


class UsageError(ValueError):
    pass


# --------------------------------------------------------------------------
# config handling
# --------------------------------------------------------------------------

def _parse_value(key: str, raw: str):
    raw = raw.strip()
    try:
        if key in _FLOAT_KEYS:
            return float(raw)
        if key in _INT_KEYS:
            x = float(raw)
            if x != int(x):
                raise ValueError
            return int(x)
        if key in _LIST_KEYS:
            return [float(t) for t in raw.split(",") if t.strip()]
    except ValueError:
        raise UsageError(f"bad value for {key}: {raw!r}") from None
    return raw


def parse_config_text(text: str) -> dict:
    out = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"config line {lineno}: expected key = value")
        key, raw = (s.strip() for s in line.split("=", 1))
        if key not in CONFIG_KEYS:
            raise UsageError(f"config line {lineno}: unknown key {key!r}")
        out[key] = _parse_value(key, raw)
    return out


def dump_config(values: dict) -> str:
    lines = []
    for key in CONFIG_KEYS:
        val = values.get(key)
        if val is None:
            continue
        if isinstance(val, list):
            val = ",".join(_num(v) for v in val)
        elif isinstance(val, float):
            val = _num(val)
        lines.append(f"{key} = {val}")
    return "\n".join(lines) + "\n"


def _merged(args) -> dict:
    values = {}
    if getattr(args, "scenario", None) is not None:
        s = args.scenario
        v = repro.SCENARIO_V[s]
        values.update(_PRESET_COMMON, effect_rp=v, v_list=None)
        values.update(zip(("n_e", "n_r", "n_p"), _PRESET_SIZES[s]))
    if args.config:
        try:
            text = Path(args.config).read_text()
        except OSError as exc:
            raise UsageError(f"cannot read config {args.config}: {exc.strerror}") from None
        values.update(parse_config_text(text))
    for key in CONFIG_KEYS:
        val = getattr(args, key, None)
        if val is not None:
            values[key] = val
    return values


def _need(values: dict, *keys):
    for key in keys:
        if values.get(key) is None:
            raise UsageError(f"missing required input --{key.replace('_', '-')} "
                             f"(or {key} in the config file)")
    return [values[k] for k in keys]


def _params(values: dict) -> DesignParams:
    alpha = values.get("alpha", 0.025)
    q = values.get("q", 0.01)
    if values.get("delta0") is None and values.get("delta1") is None:
        if values.get("r") is None or values.get("mu_r_hist") is None:
            raise UsageError("missing required input --delta0/--delta1 (or --r with --mu-r-hist)")
        return DesignParams.from_historical(alpha, values["r"], values["mu_r_hist"], q)
    d0, d1 = _need(values, "delta0", "delta1")
    return DesignParams(alpha, d0, d1, q)


def _methods(values: dict, default=ALL) -> list:
    spec = values.get("method") or default
    if spec == ALL:
        return [Method.BASELINE, Method.IU, Method.INFORMATIVE, Method.SINGLE_STEP]
    try:
        return [Method(m.strip()) for m in spec.split(",")]
    except ValueError:
        raise UsageError(f"unknown method in {spec!r}; choose from "
                         f"{', '.join(m.value for m in Method)} or all") from None


# --------------------------------------------------------------------------
# output
# --------------------------------------------------------------------------

def _num(x) -> str:
    if isinstance(x, bool):
        return str(x).lower()
    if isinstance(x, float):
        if math.isinf(x):
            return "-inf" if x < 0 else "inf"
        return format(x, ".10g")
    return str(x)


def _jsonable(x):
    if isinstance(x, float) and math.isinf(x):
        return "-inf" if x < 0 else "inf"
    return x


def render(columns: list, rows: list, fmt: str) -> str:
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([_num(v) for v in row])
        return buf.getvalue()
    if fmt == "json":
        return json.dumps([{c: _jsonable(v) for c, v in zip(columns, row)} for row in rows],
                          indent=2) + "\n"
    cells = [columns] + [[_num(v) for v in row] for row in rows]
    widths = [max(len(r[i]) for r in cells) for i in range(len(columns))]
    return "\n".join("  ".join(c.rjust(w) for c, w in zip(r, widths)) for r in cells) + "\n"


def _emit(text: str, out):
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _finish(args, values):
    if getattr(args, "dump_config", None):
        Path(args.dump_config).write_text(dump_config(values))


# --------------------------------------------------------------------------
# subcommands
# --------------------------------------------------------------------------

ANALYZE_COLUMNS = ["method", "filter", "filter_holds", "ell_EP", "ell_ER", "L_EP", "L_ER",
                   "verdict"]


def cmd_analyze(args) -> int:
    values = _merged(args)
    x_e, x_r, x_p, n_e, n_r, n_p = _need(values, "x_e", "x_r", "x_p", "n_e", "n_r", "n_p")
    if values.get("sigma") is not None:
        trial = TrialData.from_means(x_e, x_r, x_p, n_e, n_r, n_p, sigma=values["sigma"])
    else:
        sd = _need(values, "sd_e", "sd_r", "sd_p")
        trial = TrialData.from_means(x_e, x_r, x_p, n_e, n_r, n_p, None, *sd)
    params = _params(values)
    rows = []
    for m in _methods(values):
        res, out = analyze(trial, params, m, args.rho_convention)
        rows.append([m.value, res.filter_used.value, res.filter_holds, res.ell_EP, res.ell_ER,
                     res.L_EP, res.L_ER, out.verdict.value])
    _emit(render(ANALYZE_COLUMNS, rows, values.get("output_format", "text")), args.out)
    _finish(args, values)
    return EXIT_OK


def parse_mixture(text: str) -> list:
    pairs = []
    for item in text.split(","):
        try:
            v, w = item.split(":")
            pairs.append((float(v), float(w)))
        except ValueError:
            raise UsageError(f"bad mixture component {item!r}; expected v:weight") from None
    return pairs


def _mixture(pairs, values) -> MixtureScenario:
    effect_ep, sigma, mu = _need(values, "effect_ep", "sigma", "mu_r_hist")
    weights = [w for _, w in pairs]
    if min(weights) < 0 or abs(sum(weights) - 1.0) > 1e-9:
        raise UsageError(f"mixture weights must be >= 0 and sum to 1, got {weights}")
    # renormalise away rounding in user-supplied weights
    total = sum(weights)
    return MixtureScenario.over_ratios([(v, w / total) for v, w in pairs], mu, effect_ep, sigma)


def _design_scenarios(args, values) -> list:
    """List of (label, scenario-or-mixture)."""
    if args.mixture:
        return [("mixture", _mixture(parse_mixture(args.mixture), values))]
    v_list = values.get("v_list")
    if v_list:
        if values.get("weights") is not None:
            if len(values["weights"]) != len(v_list):
                raise UsageError("weights and v_list must have the same length")
            return [("mixture", _mixture(list(zip(v_list, values["weights"])), values))]
        effect_ep, sigma, mu = _need(values, "effect_ep", "sigma", "mu_r_hist")
        return [(f"v={_num(v)}", EffectScenario.from_ratio(v, mu, effect_ep, sigma)) for v in v_list]
    effect_ep, effect_rp, sigma = _need(values, "effect_ep", "effect_rp", "sigma")
    label = str(args.scenario) if args.scenario is not None else ""
    return [(label, EffectScenario(effect_ep, effect_rp, sigma))]


DESIGN_COLUMNS = ["method", "scenario", "n_E", "n_R", "n_P", "N", "achieved_power"]


def _ratios(args):
    if args.ratios:
        try:
            c_r, c_p = (float(t) for t in args.ratios.split(","))
        except ValueError:
            raise UsageError("--ratios expects c_R,c_P") from None
        return c_r, c_p
    if args.allocation:
        try:
            n_e, n_r, n_p = (int(t) for t in args.allocation.split(","))
        except ValueError:
            raise UsageError("--allocation expects n_E,n_R,n_P") from None
        return n_r / n_e, n_p / n_e
    return None


def cmd_design(args) -> int:
    values = _merged(args)
    params = _params(values)
    target = values.get("target_power", 0.9)
    if not params.alpha < target < 1:
        raise UsageError("target power must lie in (alpha, 1)")
    ratios = _ratios(args)
    rows, extra = [], []
    for label, scen in _design_scenarios(args, values):
        for m in _methods(values):
            if args.mode == "mc":
                mode = MonteCarlo(values.get("reps", 100_000), values.get("seed", 20240101))
            else:
                mode = args.mode or default_mode(m)
            if ratios is not None:
                res = required_total_n(scen, *ratios, params, m, target, n_cap=args.n_cap,
                                       mode=mode, rho_convention=args.rho_convention)
            else:
                res = optimize_allocation(scen, params, m, target, n_cap=args.n_cap, mode=mode,
                                          rho_convention=args.rho_convention, label=label)
            row = res.as_row()
            row["scenario"] = label
            rows.append([row[c] for c in DESIGN_COLUMNS])
            extra.append((res.c_R, res.c_P))
    fmt = values.get("output_format", "text")
    if fmt == "text":
        cols = DESIGN_COLUMNS + ["c_R", "c_P"]
        text = render(cols, [r + list(e) for r, e in zip(rows, extra)], fmt)
    else:
        text = render(DESIGN_COLUMNS, rows, fmt)
    _emit(text, args.out)
    _finish(args, values)
    return EXIT_OK


def cmd_simulate(args) -> int:
    values = _merged(args)
    params = _params(values)
    sizes = tuple(_need(values, "n_e", "n_r", "n_p"))
    reps = values.get("reps", 100_000)
    seed = values.get("seed", 20240101)
    if reps < 1:
        raise UsageError("reps must be >= 1")
    effect_ep, sigma = _need(values, "effect_ep", "sigma")
    methods = _methods(values)
    if values.get("v_list"):
        mu = _need(values, "mu_r_hist")[0]
        scenarios = []
        for v in values["v_list"]:
            if not 0.0 <= v <= 1.2:
                raise UsageError(f"v must lie in [0, 1.2], got {v}")
            scenarios.append(EffectScenario.from_ratio(v, mu, effect_ep, sigma))
    else:
        effect_rp = _need(values, "effect_rp")[0]
        scenarios = [EffectScenario(effect_ep, effect_rp, sigma)]
    summaries = []
    for scen in scenarios:
        cfg = SimulationConfig(scen, sizes, params, tuple(methods), reps, seed, args.rho_convention)
        summaries.append(run_simulation(cfg, args.workers))
    fmt = values.get("output_format", "csv")
    text = summaries_to_csv(summaries)
    if fmt != "csv":
        reader = list(csv.reader(io.StringIO(text)))
        cols, rows = reader[0], reader[1:]
        text = render(cols, rows, fmt)
    _emit(text, args.out)
    _finish(args, values)
    return EXIT_OK


def cmd_reproduce(args) -> int:
    if args.target not in repro.TARGETS:
        raise UsageError(f"unknown target {args.target!r}; choose from {', '.join(repro.TARGETS)}")
    if args.target == "table4":
        if args.reps < 1:
            raise UsageError("reps must be >= 1")
        result = repro.table4(args.reps, args.seed, args.workers)
    elif args.target == "table1":
        result = repro.table1(optimize=not args.no_optimize)
    else:
        result = repro.TARGETS[args.target]()
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    files = []
    for art in result.artifacts:
        (out_dir / art.name).write_text(render(art.columns, art.rows, "csv"))
        files.append(art.name)
    manifest = {"target": result.target, "files": files, "tolerances": result.tolerances,
                "notes": result.notes}
    (out_dir / f"manifest_{result.target}.json").write_text(json.dumps(manifest, indent=2) + "\n")
    for name in files:
        print(out_dir / name)
    return EXIT_OK


# --------------------------------------------------------------------------
# parser
# --------------------------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        # one-line diagnostic instead of usage + message
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _add_common(p: argparse.ArgumentParser, fmt_default: str):
    p.add_argument("--config", help="key = value file; flags override its entries")
    p.add_argument("--dump-config", metavar="PATH", help="write the merged inputs as a config file")
    p.add_argument("--out", help="write output here instead of stdout")
    p.add_argument("--format", dest="output_format", choices=FORMATS,
                   help=f"output format (default {fmt_default})")
    p.add_argument("--method", help="iu, informative, single-step, baseline, a comma list, or all")
    p.add_argument("--rho-convention", default=RhoConvention.EXACT.value,
                   choices=[c.value for c in RhoConvention],
                   help="correlation used for the single-step quantile")
    p.add_argument("--scenario", type=int, choices=sorted(repro.SCENARIO_V),
                   help="preset worked scenario (lowest precedence)")
    for key in ("alpha", "delta0", "delta1", "r", "q", "sigma"):
        p.add_argument(f"--{key}", type=float)
    p.add_argument("--mu-r-hist", dest="mu_r_hist", type=float, help="historical reference effect")
    for key in ("n_e", "n_r", "n_p"):
        p.add_argument("--" + key.replace("_", "-"), dest=key, type=int)


def _add_effects(p):
    p.add_argument("--effect-ep", dest="effect_ep", type=float, help="true mu_E - mu_P")
    p.add_argument("--effect-rp", dest="effect_rp", type=float, help="true mu_R - mu_P")
    p.add_argument("--v-list", dest="v_list", type=_float_list,
                   help="comma list of reference-effect ratios v (effect_rp = v * mu_r_hist)")
    p.add_argument("--reps", type=int)
    p.add_argument("--seed", type=int)


def _float_list(text: str) -> list:
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a comma list of numbers, got {text!r}")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="threearm", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("analyze", help="bounds and verdicts for observed data")
    _add_common(p, "text")
    for key in ("x_e", "x_r", "x_p", "sd_e", "sd_r", "sd_p"):
        p.add_argument("--" + key.replace("_", "-"), dest=key, type=float)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("design", help="optimal allocation and total sample size")
    _add_common(p, "text")
    _add_effects(p)
    p.add_argument("--target-power", dest="target_power", type=float)
    p.add_argument("--weights", type=_float_list, help="prior weights matching --v-list")
    p.add_argument("--mixture", help='discrete prior "v:weight,v:weight"')
    p.add_argument("--ratios", help="fix c_R,c_P and only search n_E")
    p.add_argument("--allocation", help="fix the ratios of n_E,n_R,n_P and only search n_E")
    p.add_argument("--mode", choices=(ANALYTIC, QUADRATURE, "mc"),
                   help="success probability evaluation (default: analytic, quadrature "
                        "for the informative bounds)")
    p.add_argument("--n-cap", dest="n_cap", type=int, default=DEFAULT_N_CAP)
    p.set_defaults(func=cmd_design)

    p = sub.add_parser("simulate", help="Monte Carlo operating characteristics (CSV)")
    _add_common(p, "csv")
    _add_effects(p)
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("reproduce", help="recompute a reference table and write CSVs")
    p.add_argument("target", help="table1, table2, table4 or example")
    p.add_argument("--out-dir", default="reproduced")
    p.add_argument("--reps", type=int, default=100_000)
    p.add_argument("--seed", type=int, default=20240101)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--no-optimize", action="store_true",
                   help="table1: skip the full allocation search")
    p.set_defaults(func=cmd_reproduce, config=None)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (NoSignChangeError, RootNotConvergedError, TargetUnreachableError,
            FloatingPointError) as exc:
        print(f"threearm: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (UsageError, ValueError) as exc:
        print(f"threearm: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
