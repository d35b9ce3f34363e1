"""``nearcs`` command line: figure sweeps, theory checks and manifest replay.

Exit codes: 0 success, 1 runtime failure, 2 usage error.
"""
from __future__ import annotations

import argparse
import configparser
import csv
import os
import shlex
import sys
from dataclasses import replace
from importlib import resources

import numpy as np

from . import __version__
from .config import ConfigError, Manifest, dump_config, load_config_with_manifest, parse_config
from .harness import ExperimentConfig, run_sweep
from .numerics import ParameterError, RngStream
from .sideinfo import DParams

FIGURES = {
    "support-accuracy": ("fig3_support_accuracy.cfg", "support_accuracy"),
    "nmse-vs-snr": ("fig4_nmse_on_grid.cfg", "nmse_db"),
    "sparsity-sweep": ("fig6_sparsity.cfg", "prob_accurate"),
    "compression-sweep": ("fig7_compression.cfg", "prob_accurate"),
    "perturbation-sweep": ("fig8_perturbation.cfg", "nmse_db"),
}
OFF_GRID_NMSE = "fig5_nmse_off_grid.cfg"
SEED_ENV = "NEARCS_SEED"

CONFIG_HELP = """\
config file keys (INI style, unknown keys are errors):
  [system]     N N_sub K M d S_taps g snr_db f_m f_s C grid_mode d_sub q_model
  [experiment] sweep_axis sweep_values trials master_seed theta estimators
               common_random_numbers
  [estimator]  d D_mode K_rule literal_Y_correlation d_schedule
seed priority: --seed, then master_seed in --config, then $NEARCS_SEED, then 0.
"""


class UsageError(Exception):
    pass


def _floats(text: str) -> tuple[float, ...]:
    try:
        vals = tuple(float(x) for x in text.split(",") if x.strip())
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from exc
    if not vals:
        raise argparse.ArgumentTypeError("empty list")
    return vals


def _ints(text: str) -> tuple[int, ...]:
    vals = _floats(text)
    if any(not v.is_integer() for v in vals):
        raise argparse.ArgumentTypeError(f"expected integers, got {text!r}")
    return tuple(int(v) for v in vals)


def committed_config_text(name: str) -> str:
    return resources.files("nearcs").joinpath("configs", name).read_text(encoding="utf-8")


def _explicit_seed(path: str) -> bool:
    p = configparser.ConfigParser(interpolation=None)
    p.optionxform = str
    p.read(path, encoding="utf-8")
    return p.has_option("experiment", "master_seed")


def _figure_config(args) -> ExperimentConfig:
    if args.config:
        cfg, _ = load_config_with_manifest(args.config)
        seed_in_file = _explicit_seed(args.config)
    else:
        name = FIGURES[args.figure][0]
        if args.figure == "nmse-vs-snr" and args.grid == "off":
            name = OFF_GRID_NMSE
        cfg, _ = parse_config(committed_config_text(name), name)
        seed_in_file = False

    base = cfg.base
    if args.grid is not None:
        base = base.with_(grid_mode="on_grid" if args.grid == "on" else "off_grid")
    sweep = cfg.sweep_values
    for flag, axis, field, conv in (("snr", "snr", "snr_db", float), ("m", "compression_M", "M", int),
                                    ("c", "amplitude_ratio_C", "C", float),
                                    ("s_blocks", "sparsity_blocks", None, int)):
        vals = getattr(args, flag)
        if vals is None:
            continue
        if cfg.sweep_axis == axis:
            sweep = tuple(conv(v) for v in vals)
        elif len(vals) != 1:
            raise UsageError(f"--{flag.replace('_', '-')} takes one value unless it is the swept axis")
        elif field is None:
            base = base.with_(S_taps=int(vals[0]) * base.d)
        else:
            base = base.with_(**{field: conv(vals[0])})

    if args.seed is not None:
        seed = args.seed
    elif seed_in_file:
        seed = cfg.master_seed
    elif os.environ.get(SEED_ENV):
        try:
            seed = int(os.environ[SEED_ENV])
        except ValueError as exc:
            raise UsageError(f"${SEED_ENV} must be an integer") from exc
    else:
        seed = cfg.master_seed
    return replace(cfg, base=base, sweep_values=sweep, master_seed=seed,
                   trials=args.trials if args.trials is not None else cfg.trials,
                   timing=bool(args.timing))


def _summary(records, metric: str) -> str:
    ests = sorted({r.estimator for r in records})
    values = sorted({r.sweep_value for r in records})
    cell = {(r.estimator, r.sweep_value): getattr(r, metric) for r in records}
    head = f"{'value':>10} " + " ".join(f"{e:>10}" for e in ests)
    lines = [f"{metric} by {records[0].sweep_axis}", head]
    for v in values:
        lines.append(f"{v:>10g} " + " ".join(f"{cell[e, v]:>10.4g}" for e in ests))
    return "\n".join(lines)


def _manifest_path(csv_path: str) -> str:
    stem = csv_path[:-4] if csv_path.endswith(".csv") else csv_path
    return stem + ".run_manifest.cfg"


def _write_manifest(csv_path: str, cfg: ExperimentConfig | None, command: str) -> str:
    mpath = _manifest_path(csv_path)
    man = Manifest(version=__version__, out=os.path.abspath(csv_path), command=command)
    if cfg is None:
        cfg, _ = parse_config("")
    with open(mpath, "w", encoding="utf-8") as fh:
        fh.write(dump_config(cfg, man))
    return mpath


def cmd_simulate(args) -> int:
    cfg = _figure_config(args)
    os.makedirs(args.out, exist_ok=True)
    name = args.figure if args.grid is None else f"{args.figure}-{args.grid}-grid"
    csv_path = os.path.join(args.out, f"{name}.csv")
    cfg = replace(cfg, out_path=csv_path)
    records = run_sweep(cfg, workers=args.workers)
    _write_manifest(csv_path, cfg, "simulate " + args.figure)
    print(_summary(records, FIGURES[args.figure][1]))
    print(f"wrote {csv_path}")
    return 0


def cmd_replay(args) -> int:
    cfg, man = load_config_with_manifest(args.manifest)
    out = args.out or man.out
    if not out:
        raise UsageError("manifest has no output path; pass --out")
    if man.command and man.command.startswith("theory"):
        argv = shlex.split(man.command) + ["--out", out]
        return main(argv)
    cfg = replace(cfg, out_path=out)
    run_sweep(cfg, workers=args.workers)
    print(f"wrote {out}")
    return 0


# -- theory ----------------------------------------------------------------------

def _dist_params(args):
    from .theory import SelectionDistParams

    return SelectionDistParams(M=args.m, g=args.g, sigma2=args.sigma2, S_taps=args.s,
                               d=getattr(args, "d", 1), K=getattr(args, "k", 1))


def _density_table(path, t, theo, emp, footer: str) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("t", "pdf_theoretical", "pdf_empirical"))
        for row in zip(t, theo, emp):
            w.writerow([repr(float(x)) for x in row])
        fh.write(f"# {footer}\n")


def _histogram(samples, bins):
    dens, edges = np.histogram(samples, bins=bins, density=True)
    return 0.5 * (edges[:-1] + edges[1:]), dens


def _theory_command(args) -> str:
    return " ".join(shlex.quote(a) for a in ["theory"] + args.theory_argv)


def cmd_pdf_t(args) -> int:
    from . import theory as th

    prm = _dist_params(args)
    t1, t2 = th.sample_T_single(prm, args.samples, RngStream(args.seed).child("pdf-t"))
    t = t1 - t2
    ks = th.ks_against_cdf(t, th.single_T_cdf(prm))
    centers, emp = _histogram(t, args.bins)
    _density_table(args.out, centers, th.pdf_T_single(centers, prm), emp, f"ks={ks!r} samples={args.samples}")
    _write_manifest(args.out, None, _theory_command(args))
    print(f"KS = {ks:.5f} over {args.samples} samples; wrote {args.out}")
    return 0


def cmd_gamma_diff(args) -> int:
    from . import theory as th

    prm = _dist_params(args)
    g1, g2 = prm.gamma_nonzero(), prm.gamma_zero()
    gen = RngStream(args.seed).child("gamma-diff").generator()
    x = gen.gamma(g1.alpha, 1.0 / g1.beta, args.samples) - gen.gamma(g2.alpha, 1.0 / g2.beta, args.samples)
    ks = th.ks_against_cdf(x, th.gamma_diff_cdf(g1, g2))
    centers, emp = _histogram(x, args.bins)
    _density_table(args.out, centers, th.gamma_diff_pdf(centers, g1, g2), emp,
                   f"ks={ks!r} samples={args.samples} alpha1={g1.alpha!r} beta1={g1.beta!r} "
                   f"alpha2={g2.alpha!r} beta2={g2.beta!r}")
    _write_manifest(args.out, None, _theory_command(args))
    print(f"KS = {ks:.5f} over {args.samples} samples; wrote {args.out}")
    return 0


def cmd_optimal_prior(args) -> int:
    from . import theory as th

    dp = DParams(M=args.m, S_taps=args.s, g=args.g, sigma2=args.sigma2,
                 d=args.d if args.regime == "theorem2" else 1, K_eff=args.k if args.regime == "theorem2" else 1)
    rep = th.validate_optimal_prior(dp, p_grid=args.p, dps=args.dp, regime=args.regime, D_scale=args.d_scale)
    cols = ("p", "dp", "D", "dv_theory", "dv_opt", "pe_theory", "pe_opt", "rel_gap")
    with open(args.out, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(cols)
        for r in rep.rows:
            w.writerow([repr(float(getattr(r, c))) for c in cols])
    _write_manifest(args.out, None, _theory_command(args))
    for r in rep.rows:
        print(f"p={r.p:g} dp={r.dp:g} dv_theory={r.dv_theory:.6g} dv_opt={r.dv_opt:.6g} rel_gap={r.rel_gap:.3e}")
    print(f"max relative P_e gap {rep.max_rel_gap:.3e}; wrote {args.out}")
    return 0


def cmd_validate(args) -> int:
    from . import theory as th

    checks = th.validate_distributions(args.samples, seed=args.seed, pipeline=not args.no_pipeline)
    with open(args.out, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("check", "value", "threshold", "passed"))
        for c in checks:
            w.writerow((c.name, repr(float(c.value)), repr(c.threshold), "true" if c.passed else "false"))
    _write_manifest(args.out, None, _theory_command(args))
    for c in checks:
        print(f"{'PASS' if c.passed else 'FAIL'}  {c.name}: {c.value:.3e} (limit {c.threshold:g})")
    print(f"wrote {args.out}")
    return 0


# -- parser ----------------------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(2, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    top = _Parser(prog="nearcs", description="Greedy channel estimation with out-of-band priors.")
    top.add_argument("--version", action="version", version=f"nearcs {__version__}")
    sub = top.add_subparsers(dest="command", required=True, parser_class=_Parser)

    sim = sub.add_parser("simulate", help="run a figure sweep",
                         formatter_class=argparse.RawDescriptionHelpFormatter, epilog=CONFIG_HELP)
    sim.add_argument("figure", choices=sorted(FIGURES))
    sim.add_argument("--grid", choices=("on", "off"), help="on-grid or off-grid supports")
    sim.add_argument("--trials", type=int, help="Monte Carlo trials per sweep point")
    sim.add_argument("--seed", type=int, help="master seed")
    sim.add_argument("--snr", type=_floats, help="SNR list in dB (one value unless swept)")
    sim.add_argument("--m", type=_ints, help="pilot count(s)")
    sim.add_argument("--c", type=_floats, help="amplitude ratio(s) C")
    sim.add_argument("--s-blocks", dest="s_blocks", type=_ints, help="number of nonzero blocks")
    sim.add_argument("--config", help="config file replacing the committed figure defaults")
    sim.add_argument("--out", default="results", help="output directory (default: results)")
    sim.add_argument("--workers", type=int, default=1, help="worker processes")
    sim.add_argument("--timing", action="store_true", help="record wallclock (makes CSV non-reproducible)")
    sim.set_defaults(func=cmd_simulate)

    rep = sub.add_parser("replay", help="re-run a sweep or theory command from its run manifest")
    rep.add_argument("manifest")
    rep.add_argument("--out", help="output path (default: the manifest's)")
    rep.add_argument("--workers", type=int, default=1)
    rep.set_defaults(func=cmd_replay)

    theory = sub.add_parser("theory", help="distribution and optimality checks")
    tsub = theory.add_subparsers(dest="theory_command", required=True, parser_class=_Parser)

    def common(p, out, block=False, samples=200_000):
        p.add_argument("--m", type=int, default=100, help="pilots M")
        p.add_argument("--s", type=int, default=5 if not block else 10, help="nonzero taps S")
        p.add_argument("--g", type=float, default=1.0, help="tap modulus g")
        p.add_argument("--sigma2", type=float, default=1.0, help="noise variance")
        if block:
            p.add_argument("--d", type=int, default=2, help="block length")
            p.add_argument("--k", type=int, default=4, help="subcarriers")
        p.add_argument("--samples", type=int, default=samples)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--out", default=out)

    pt = tsub.add_parser("pdf-t", help="single-tap selection statistic T = T1 - T2")
    common(pt, "pdf_t.csv")
    pt.add_argument("--bins", type=int, default=200)
    pt.set_defaults(func=cmd_pdf_t)

    gd = tsub.add_parser("gamma-diff", help="Gamma-difference density of the block statistics")
    common(gd, "gamma_diff.csv", block=True)
    gd.add_argument("--bins", type=int, default=200)
    gd.set_defaults(func=cmd_gamma_diff)

    op = tsub.add_parser("optimal-prior", help="closed-form prior difference against a grid optimum")
    op.add_argument("--regime", choices=("theorem1", "theorem2"), default="theorem1")
    op.add_argument("--m", type=int, default=25)
    op.add_argument("--s", type=int, default=20)
    op.add_argument("--g", type=float, default=1.0)
    op.add_argument("--sigma2", type=float, default=2.0)
    op.add_argument("--d", type=int, default=4)
    op.add_argument("--k", type=int, default=1)
    op.add_argument("--p", type=_floats, default=(0.5,), help="base probabilities")
    op.add_argument("--dp", type=_floats, default=(1e-3, 1e-2), help="probability increments")
    op.add_argument("--d-scale", dest="d_scale", type=float, default=1.0, help="multiply D (sanity check)")
    op.add_argument("--out", default="optimal_prior.csv")
    op.set_defaults(func=cmd_optimal_prior)

    vd = tsub.add_parser("validate-distributions", help="KS and identity checks for all laws")
    vd.add_argument("--samples", type=int, default=1_000_000)
    vd.add_argument("--seed", type=int, default=0)
    vd.add_argument("--no-pipeline", action="store_true", help="skip the channel-pipeline samplers")
    vd.add_argument("--out", default="validate_distributions.csv")
    vd.set_defaults(func=cmd_validate)
    return top


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    args = parser.parse_args(argv)  # exits 2 on usage errors
    if args.command == "theory":
        rest = argv[argv.index("theory") + 1:]
        if "--out" in rest:
            i = rest.index("--out")
            rest = rest[:i] + rest[i + 2:]
        args.theory_argv = rest
    try:
        return args.func(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"nearcs: error: {exc}", file=sys.stderr)
        return 2
    except (ConfigError, ParameterError, ArithmeticError, OSError) as exc:
        print(f"nearcs: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
