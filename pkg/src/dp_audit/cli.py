"""Command-line front end.

Exit status: 0 on success (audit accepted, validation bound respected),
2 when an audit rejects or a validation bound is violated, 1 on usage or
runtime errors.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from pathlib import Path

from . import __version__
from .adversary import mixture_tradeoff_sup
from .cipa import SamplePair, audit
from .cipb import build_band, sup_width
from .harness import (
    ExperimentConfig,
    Mode,
    f0_demo,
    persist,
    result_json,
    run_experiment,
    type2_bound,
)
from .mechanisms import External, IntervalMixture, MechanismError, parse_mechanism
from .tradeoff import TruncatedTradeoff, parse_tradeoff

DEFAULT_SEED = 0xC0FFEE
SEED_ENV = "DP_AUDIT_SEED"

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_FAIL = 2


class UsageError(Exception):
    pass


def read_samples(path) -> list[float]:
    """One decimal float per line; blank lines and ``#`` comments ignored."""
    values = []
    try:
        fh = open(path, encoding="utf-8")
    except OSError as exc:
        raise UsageError(f"cannot read sample file {path}: {exc.strerror}") from None
    with fh:
        for lineno, line in enumerate(fh, 1):
            token = line.split("#", 1)[0].strip()
            if not token:
                continue
            try:
                v = float(token)
            except ValueError:
                raise UsageError(f"{path}:{lineno}: not a number: {token!r}") from None
            if not math.isfinite(v):
                raise UsageError(f"{path}:{lineno}: non-finite value {token!r}")
            values.append(v)
    if not values:
        raise UsageError(f"{path}: no samples found")
    return values


def resolve_seed(arg) -> int:
    if arg is not None:
        return arg
    env = os.environ.get(SEED_ENV)
    if env:
        try:
            return int(env, 0)
        except ValueError:
            raise UsageError(f"{SEED_ENV} must be an integer, got {env!r}") from None
    return DEFAULT_SEED


def _seed_type(text):
    try:
        return int(text, 0)
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid seed {text!r}") from None


def _alpha_type(text):
    v = float(text)
    if not 0 < v < 1:
        raise argparse.ArgumentTypeError(f"alpha must be in (0, 1), got {text}")
    return v


def _pos_int(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return v


def _int_list(text):
    try:
        vals = [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None
    if not vals or min(vals) < 1:
        raise argparse.ArgumentTypeError(f"expected positive integers, got {text!r}")
    return vals


def _add_seed(p):
    p.add_argument(
        "--seed", type=_seed_type, default=None,
        help=f"master seed (default: ${SEED_ENV}, else {DEFAULT_SEED:#x})",
    )


def _add_experiment_flags(p, *, alpha, n, trials):
    p.add_argument("--alpha", type=_alpha_type, default=alpha, help=f"error level (default: {alpha})")
    p.add_argument("--n", type=_pos_int, default=n, help=f"samples per dataset (default: {n})")
    p.add_argument("--trials", type=_pos_int, default=trials, help=f"Monte Carlo trials (default: {trials})")
    _add_seed(p)
    p.add_argument("--threads", type=_pos_int, default=1, help="worker threads; output does not depend on it")
    p.add_argument("--out", type=Path, help="write machine-readable results to this path")
    p.add_argument("--format", choices=("json", "csv"), default="json", help="format for --out (default: json)")
    p.add_argument("--record-runtime", action="store_true", help="store wall-clock runtime in the result")


def _add_sample_source(p):
    p.add_argument("--samples-d", type=Path, help="file of outputs on D, one float per line")
    p.add_argument("--samples-dp", type=Path, help="file of outputs on D', one float per line")
    p.add_argument("--mechanism", help="draw samples from a mechanism spec instead of files")
    p.add_argument("--n", type=_pos_int, help="samples per dataset when using --mechanism")
    _add_seed(p)
    p.add_argument("--timeout", type=float, default=30.0, help="external mechanism timeout in seconds (default: 30)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dp-audit",
        description="Audit point f-DP claims and build trade-off confidence bands from black-box samples.",
        epilog=(
            "trade-off specs: identity | zero | gdp:mu=F | epsdelta:eps=F,delta=F | laplace:eps=F | "
            "unifshift:zeta=F | pwl:PATH, optionally suffixed with @r=F. "
            "mechanism specs: gaussian:mu=F,sigma=F | laplace:mu=F,b=F | unifshift:zeta=F | "
            "truncgauss:sigma=F | mixture:m=N | synthetic-separated | cmd:COMMAND."
        ),
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", required=True)

    p = sub.add_parser("audit", help="test a claimed trade-off function against samples")
    p.add_argument("--f", required=True, help="claimed trade-off function spec")
    p.add_argument("--alpha", type=_alpha_type, default=0.05, help="type I error level (default: 0.05)")
    _add_sample_source(p)
    p.add_argument("--out", type=Path, help="write the verdict as JSON to this path")

    p = sub.add_parser("band", help="build a confidence band for the trade-off function")
    p.add_argument("--alpha", type=_alpha_type, default=0.1, help="1 - confidence level (default: 0.1)")
    _add_sample_source(p)
    p.add_argument("--monotonize", action="store_true", help="use the running maximum of the lower band")
    p.add_argument("--out", type=Path, help="write the band to this path")
    p.add_argument("--format", choices=("json", "csv"), default="json", help="format for --out (default: json)")
    p.add_argument("--grid-size", type=_pos_int, default=101, help="CSV grid points over [0, 1] (default: 101)")

    p = sub.add_parser("bound", help="theoretical type II error bound of the auditor")
    p.add_argument("--f", required=True, help="claimed trade-off function spec")
    p.add_argument("--g", required=True, help="relative trade-off function spec (may carry @r=)")
    p.add_argument("--r", type=float, help="truncation point for --g if not given inline")
    p.add_argument("--n", type=_pos_int, required=True, help="samples per dataset")
    p.add_argument("--alpha", type=_alpha_type, default=0.05, help="type I error level (default: 0.05)")

    p = sub.add_parser("validate-type1", help="Monte Carlo type I error of the auditor")
    p.add_argument("--mechanism", required=True, help="mechanism spec")
    p.add_argument("--f", required=True, help="claimed trade-off function spec (should hold)")
    _add_experiment_flags(p, alpha=0.05, n=500, trials=2000)
    p.add_argument("--keep-records", action="store_true", help="keep per-trial outcomes in the result")

    p = sub.add_parser("validate-type2", help="Monte Carlo type II error against the theoretical bound")
    p.add_argument("--mechanism", required=True, help="mechanism spec (should violate --f)")
    p.add_argument("--f", required=True, help="claimed trade-off function spec")
    p.add_argument("--g", required=True, help="relative trade-off function spec (may carry @r=)")
    p.add_argument("--r", type=float, help="truncation point for --g if not given inline")
    _add_experiment_flags(p, alpha=0.05, n=1000, trials=500)
    p.add_argument("--keep-records", action="store_true", help="keep per-trial outcomes in the result")

    p = sub.add_parser("validate-coverage", help="Monte Carlo coverage of the confidence band")
    p.add_argument("--mechanism", required=True, help="mechanism spec with an analytic trade-off")
    _add_experiment_flags(p, alpha=0.1, n=1000, trials=1000)
    p.add_argument("--keep-records", action="store_true", help="keep per-trial outcomes in the result")

    p = sub.add_parser("validate-width", help="median band width over a ladder of sample sizes")
    p.add_argument("--mechanism", required=True, help="mechanism spec")
    p.add_argument("--alpha", type=_alpha_type, default=0.1, help="1 - confidence level (default: 0.1)")
    p.add_argument("--n", type=_int_list, default=[500, 2000, 8000],
                   help="comma-separated sample sizes (default: 500,2000,8000)")
    p.add_argument("--trials", type=_pos_int, default=100, help="trials per sample size (default: 100)")
    _add_seed(p)
    p.add_argument("--threads", type=_pos_int, default=1, help="worker threads; output does not depend on it")
    p.add_argument("--out", type=Path, help="write results as JSON to this path")
    p.add_argument("--record-runtime", action="store_true", help="store wall-clock runtime in the result")

    p = sub.add_parser("demo-impossibility", help="auditor cannot tell uniform data from the interval mixture")
    p.add_argument("--m", type=_pos_int, default=400, help="mixture resolution; m^2 cells (default: 400)")
    p.add_argument("--f", default="identity", help="claimed trade-off function spec (default: identity)")
    p.add_argument("--tolerance", type=float, default=0.05, help="allowed rate difference (default: 0.05)")
    _add_experiment_flags(p, alpha=0.2, n=2, trials=2000)
    p.add_argument("--keep-records", action="store_true", help="keep per-trial outcomes in the result")

    p = sub.add_parser("demo-lowerband", help="lower band cannot certify privacy loss without MLR")
    p.add_argument("--m", type=_pos_int, default=400, help="mixture resolution; m^2 cells (default: 400)")
    p.add_argument("--tolerance", type=float, default=0.05, help="allowed rate difference (default: 0.05)")
    _add_experiment_flags(p, alpha=0.2, n=2, trials=2000)
    p.add_argument("--keep-records", action="store_true", help="keep per-trial outcomes in the result")

    p = sub.add_parser("demo-f0", help="f(0) is not estimable: Gaussian pair vs its truncation")
    p.add_argument("--sigma", type=float, default=0.25, help="Gaussian scale (default: 0.25)")
    p.add_argument("--alpha", type=_alpha_type, default=0.1, help="1 - confidence level (default: 0.1)")
    p.add_argument("--n", type=_pos_int, default=200, help="samples per dataset (default: 200)")
    p.add_argument("--trials", type=_pos_int, default=500, help="Monte Carlo trials (default: 500)")
    _add_seed(p)
    p.add_argument("--threads", type=_pos_int, default=1, help="worker threads; output does not depend on it")
    p.add_argument("--out", type=Path, help="write results as JSON to this path")
    return parser


def _load_pair(args) -> SamplePair:
    files = args.samples_d is not None or args.samples_dp is not None
    if files and args.mechanism:
        raise UsageError("give either --samples-d/--samples-dp or --mechanism, not both")
    if files:
        if args.samples_d is None or args.samples_dp is None:
            raise UsageError("both --samples-d and --samples-dp are required")
        d, dp = read_samples(args.samples_d), read_samples(args.samples_dp)
        if len(d) != len(dp):
            raise UsageError(f"sample files differ in length ({len(d)} vs {len(dp)})")
        return SamplePair(d, dp)
    if not args.mechanism:
        raise UsageError("no samples: give --samples-d and --samples-dp, or --mechanism with --n")
    if args.n is None:
        raise UsageError("--mechanism needs --n")
    seed = resolve_seed(args.seed)
    mech = parse_mechanism(args.mechanism, timeout=args.timeout)
    try:
        return SamplePair(mech.sample("D", args.n, seed), mech.sample("Dprime", args.n, seed))
    finally:
        if isinstance(mech, External):
            mech.close()


def _write(path: Path, text: str):
    try:
        path.write_text(text, encoding="utf-8")
    except OSError as exc:
        raise OSError(f"could not write {path}: {exc.strerror}") from None


def _relative(args) -> TruncatedTradeoff:
    g = parse_tradeoff(args.g)
    if isinstance(g, TruncatedTradeoff):
        if args.r is not None and args.r != g.r:
            raise UsageError("--r conflicts with the @r= suffix of --g")
        return g
    if args.r is None:
        raise UsageError("the relative function needs a truncation point: --r or an @r= suffix on --g")
    return TruncatedTradeoff(g, args.r)


def cmd_audit(args, out) -> int:
    f = parse_tradeoff(args.f)
    pair = _load_pair(args)
    verdict = audit(pair, f, args.alpha)
    print(f"n = {pair.n}, alpha = {args.alpha}, epsilon = {verdict.epsilon:.6g}, claim = {f.spec}", file=out)
    if verdict.is_point_dp:
        print("verdict: consistent with the claimed trade-off function (True)", file=out)
    else:
        w = verdict.witness
        print(
            f"verdict: claim rejected (False) at k = {w.k}, side = {w.side}, "
            f"l = {w.l}, l* = {w.l_star}, threshold = {w.threshold:.6g}",
            file=out,
        )
    if args.out:
        doc = {
            "is_point_dp": verdict.is_point_dp,
            "witness": None if verdict.witness is None else vars(verdict.witness),
            "epsilon": verdict.epsilon,
            "alpha": args.alpha,
            "n": pair.n,
            "f": f.spec,
        }
        _write(args.out, json.dumps(doc, indent=2, sort_keys=True) + "\n")
    return EXIT_OK if verdict.is_point_dp else EXIT_FAIL


def cmd_band(args, out) -> int:
    pair = _load_pair(args)
    band = build_band(pair, args.alpha, args.monotonize)
    print(f"n = {band.n}, alpha = {band.alpha}, epsilon = {band.epsilon:.6g}", file=out)
    print(f"sup width over x >= eps + 1/(n+1): {sup_width(band):.6g}", file=out)
    if args.out:
        text = band.to_json() if args.format == "json" else band.to_csv(args.grid_size)
        _write(args.out, text)
    return EXIT_OK


def cmd_bound(args, out) -> int:
    f = parse_tradeoff(args.f)
    g = _relative(args)
    b = type2_bound(f, g, args.n, args.alpha)
    print(f"delta_r = {b.delta_r:.9g}", file=out)
    print(f"type II error bound beta = {b.beta:.6g}", file=out)
    return EXIT_OK


def _slack(ci):
    return (ci[1] - ci[0]) / 2


def _finish(result, args, out, passed: bool, summary: str) -> int:
    print(summary, file=out)
    print("PASS" if passed else "FAIL", file=out)
    if args.out:
        persist(result, args.out, args.format.upper())
    return EXIT_OK if passed else EXIT_FAIL


def _config(args, mode, pair, **kw):
    return ExperimentConfig(
        pair=pair,
        mode=mode,
        alpha=args.alpha,
        n=args.n,
        trials=args.trials,
        master_seed=resolve_seed(args.seed),
        keep_records=getattr(args, "keep_records", False) or getattr(args, "format", "json") == "csv",
        **kw,
    )


def _run(cfg, args, **kw):
    pair = cfg.pair
    try:
        return run_experiment(cfg, threads=args.threads, record_runtime=args.record_runtime, **kw)
    finally:
        if isinstance(pair, External):
            pair.close()


def cmd_validate_type1(args, out) -> int:
    cfg = _config(args, Mode.TYPE_I, parse_mechanism(args.mechanism), claim_f=parse_tradeoff(args.f))
    res = _run(cfg, args)
    lo, hi = res.wilson_ci
    return _finish(
        res, args, out, lo <= args.alpha,
        f"rejection rate {res.rate:.4f} (Wilson 95% [{lo:.4f}, {hi:.4f}]) vs alpha = {args.alpha}",
    )


def cmd_validate_type2(args, out) -> int:
    cfg = _config(
        args, Mode.TYPE_II, parse_mechanism(args.mechanism),
        claim_f=parse_tradeoff(args.f), relative_g=_relative(args),
    )
    res = _run(cfg, args)
    lo, hi = res.wilson_ci
    return _finish(
        res, args, out, lo <= res.bound,
        f"acceptance rate {res.rate:.4f} (Wilson 95% [{lo:.4f}, {hi:.4f}]) vs bound "
        f"beta = {res.bound:.6g} (delta_r = {res.extras['delta_r']:.6g})",
    )


def cmd_validate_coverage(args, out) -> int:
    pair = parse_mechanism(args.mechanism)
    res = _run(_config(args, Mode.COVERAGE, pair), args)
    lo, hi = res.wilson_ci
    up_lo, up_hi = res.extras["upper_wilson"]
    upper_ok = up_hi >= 1 - args.alpha / 2
    full_ok = hi >= 1 - args.alpha or not pair.mlr_known
    summary = (
        f"full-band containment {res.rate:.4f} (Wilson 95% [{lo:.4f}, {hi:.4f}]) vs {1 - args.alpha:g}"
        f"{'' if pair.mlr_known else ' (not required: MLR unknown)'}\n"
        f"upper-band containment {res.extras['upper_rate']:.4f} "
        f"(Wilson 95% [{up_lo:.4f}, {up_hi:.4f}]) vs {1 - args.alpha / 2:g}"
    )
    return _finish(res, args, out, upper_ok and full_ok, summary)


def cmd_validate_width(args, out) -> int:
    pair = parse_mechanism(args.mechanism)
    results = []
    for n in args.n:
        cfg = ExperimentConfig(pair, Mode.WIDTH, args.alpha, n, args.trials, resolve_seed(args.seed))
        results.append(_run(cfg, args))
        r = results[-1]
        print(f"n = {n}: median sup width {r.rate:.4f} (95% [{r.wilson_ci[0]:.4f}, {r.wilson_ci[1]:.4f}])", file=out)
    medians = [r.rate for r in results]
    passed = all(b < a for a, b in zip(medians, medians[1:]))
    print("PASS" if passed else "FAIL", file=out)
    if args.out:
        if len(results) == 1:
            persist(results[0], args.out, "JSON")
        else:
            doc = [json.loads(result_json(r)) for r in results]
            _write(args.out, json.dumps(doc, indent=2, sort_keys=True) + "\n")
    return EXIT_OK if passed else EXIT_FAIL


def _demo(args, out, mode, claim=None) -> int:
    cfg = _config(args, mode, IntervalMixture(args.m), claim_f=claim)
    res = _run(cfg, args)
    null_ci = res.extras["null_wilson"]
    allowed = args.tolerance + _slack(res.wilson_ci) + _slack(null_ci)
    what = "rejection rate" if mode is Mode.IMPOSSIBILITY else "rate of ||f_lower|| > 1/m"
    summary = (
        f"{what}: mixture {res.rate:.4f}, uniform {res.extras['null_rate']:.4f}, "
        f"difference {res.extras['difference']:.4f} (allowed {allowed:.4f}); "
        f"||T(P_j, Q)||_inf = 1/m = {mixture_tradeoff_sup(args.m):.6g}"
    )
    return _finish(res, args, out, res.extras["difference"] <= allowed, summary)


def cmd_demo_impossibility(args, out) -> int:
    return _demo(args, out, Mode.IMPOSSIBILITY, parse_tradeoff(args.f))


def cmd_demo_lowerband(args, out) -> int:
    return _demo(args, out, Mode.LOWER_BAND)


def cmd_demo_f0(args, out) -> int:
    if not args.sigma > 0:
        raise UsageError("--sigma must be > 0")
    doc = f0_demo(args.sigma, args.n, args.alpha, args.trials, resolve_seed(args.seed), args.threads)
    rates = doc["lower0_positive_rate"]
    diff = abs(rates["gaussian"] - rates["truncated"])
    allowed = doc["tv_dataset_bound"] + 2 * 1.96 * math.sqrt(0.25 / args.trials)
    print(
        f"true f(0): gaussian 1, truncated 0; lower band certifies f(0) > 0 in "
        f"{rates['gaussian']:.4f} vs {rates['truncated']:.4f} of trials "
        f"(difference {diff:.4f}, allowed {allowed:.4f})",
        file=out,
    )
    passed = diff <= allowed
    print("PASS" if passed else "FAIL", file=out)
    if args.out:
        _write(args.out, json.dumps(doc, indent=2, sort_keys=True) + "\n")
    return EXIT_OK if passed else EXIT_FAIL


COMMANDS = {
    "audit": cmd_audit,
    "band": cmd_band,
    "bound": cmd_bound,
    "validate-type1": cmd_validate_type1,
    "validate-type2": cmd_validate_type2,
    "validate-coverage": cmd_validate_coverage,
    "validate-width": cmd_validate_width,
    "demo-impossibility": cmd_demo_impossibility,
    "demo-lowerband": cmd_demo_lowerband,
    "demo-f0": cmd_demo_f0,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_ERROR
    try:
        return COMMANDS[args.command](args, sys.stdout)
    except (UsageError, ValueError, NotImplementedError, MechanismError, OSError) as exc:
        print(f"dp-audit {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
