"""Command-line front end: simulate, predict, estimate, fit and verify.

Every subcommand writes its tables into ``--out`` together with
``run.json``, the fully resolved option set (seed included) needed to
reproduce the run.  Numbers are printed at 6 significant digits.
"""
from __future__ import annotations

import argparse
import sys
from importlib import resources
from pathlib import Path

import numpy as np

from . import __version__
from .errors import DegenerateWeights, NonConvergent, SelfCorrectError
from .estimation import (
    aggregate_metrics,
    estimate_classification,
    estimate_pooled,
    estimate_round,
    stability_report,
)
from .fitting import fit_geometric, goodness_of_fit, predict_from_single_round, residuals
from .io_formats import (
    ensure_dir,
    fmt,
    load_curves,
    load_profiles,
    load_snapshots,
    load_transcript,
    save_curves,
    save_table,
    save_transcript,
    write_json,
    _write_text,
)
from .simulator import SimulationConfig, empirical_curve, run_corollary1, run_corollary3, simulate
from .theory import (
    AccuracyCurve,
    closed_form_curve,
    dataset_params,
    derive_params,
    oracle_verifier_curve,
    rounds_to_converge,
)

DEFAULT_TARGETS = (0.0, 0.2, 0.4, 0.6, 0.8, 1.0)
VERIFY_ROUNDS = 10


class UsageError(Exception):
    """Bad arguments discovered after parsing; exits with status 2."""


def bundled_profiles():
    return sorted(
        p.name[: -len(".yaml")]
        for p in resources.files("selfcorrect.profiles").iterdir()
        if p.name.endswith(".yaml")
    )


def resolve_profile(name):
    """A filesystem path, or the name of a bundled demo profile."""
    path = Path(name)
    if path.exists() or name not in bundled_profiles():
        return load_profiles(path)
    with resources.as_file(resources.files("selfcorrect.profiles") / f"{name}.yaml") as p:
        return load_profiles(p)


def _probability(text):
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"{text!r} is not a number") from None
    if not 0.0 <= v <= 1.0:
        raise argparse.ArgumentTypeError(f"{text!r} is not a probability in [0, 1]")
    return v


def _seed(text):
    v = int(text, 0)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must be a 64-bit unsigned integer")
    return v


def _nonneg_int(text):
    v = int(text)
    if v < 0:
        raise argparse.ArgumentTypeError("must be nonnegative")
    return v


def _pos_int(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be positive")
    return v


def _targets(text):
    return [_probability(x) for x in text.split(",") if x.strip()]


def _stanza(args, **extra):
    options = {k: v for k, v in sorted(vars(args).items()) if k != "func"}
    stanza = {"command": args.command, "options": options, "version": __version__}
    if "seed" in options:
        stanza["seed"] = options["seed"]
    stanza.update(extra)
    return stanza


def _curve_summary(curve, label="Acc"):
    lines = [f"{'round':>5}  {label:>10}  {'se':>10}"]
    for t, v in enumerate(curve.values):
        se = "" if curve.stderr is None else fmt(curve.stderr[t])
        lines.append(f"{t:>5}  {fmt(v):>10}  {se:>10}")
    return "\n".join(lines)


def regime(params):
    if params.degenerate:
        return "constant (degenerate: cl=1, cs=0, Upp undefined, curve stays at Acc0)"
    if params.upp < params.acc0:
        return "descending (failure regime: Upp < Acc0, self-correction lowers accuracy)"
    if params.upp > params.acc0:
        return "ascending (accuracy rises toward Upp)"
    return "fixed point (Acc0 = Upp)"


def params_report(params):
    upp = "undefined" if params.degenerate else fmt(params.upp)
    return f"Upp={upp}, alpha={fmt(params.alpha)}"


# -- subcommands ------------------------------------------------------------


def cmd_simulate(args):
    dataset = resolve_profile(args.profile)
    config = SimulationConfig(args.rounds, args.samples, args.seed, args.oracle_verifier)
    transcript = simulate(dataset, config, workers=args.workers)
    curve = empirical_curve(transcript)
    out = ensure_dir(args.out)
    save_transcript(transcript, out / "transcript.jsonl")
    save_curves([("empirical", curve)], out / "curve.csv")
    write_json(_stanza(args), out / "run.json")
    print(_curve_summary(curve))
    return 0


def cmd_predict(args):
    params = derive_params(args.cl, args.cs, args.acc0)
    curve = predict_from_single_round(args.acc0, args.cl, args.cs, args.rounds)
    out = ensure_dir(args.out)
    save_curves([("theory", curve)], out / "curve.csv")
    report = f"{params_report(params)}\nregime: {regime(params)}\n"
    _write_text(out / "report.txt", report)
    write_json(_stanza(args), out / "run.json")
    print(report, end="")
    print(_curve_summary(curve))
    return 0


def cmd_estimate(args):
    if (args.transcript is None) == (args.snapshots is None):
        raise UsageError("give exactly one of --transcript or --snapshots")
    out = ensure_dir(args.out)
    stability = None
    if args.transcript is not None:
        transcript = load_transcript(args.transcript)
        if args.round >= transcript.n_rounds:
            raise UsageError(
                f"--round {args.round} needs round {args.round + 1}, "
                f"but the transcript ends at round {transcript.n_rounds}"
            )
        ids = transcript.question_ids
        estimates = estimate_pooled(transcript) if args.pooled else estimate_round(transcript, args.round)
        stability = stability_report(transcript)
    else:
        ids, snaps = load_snapshots(args.snapshots)
        estimates = [estimate_classification(s, literal=args.literal) for s in snaps]
    save_table(
        ["question_id", "p_hat", "p_con_hat", "p_cri_hat", "n_correct_support", "n_wrong_support"],
        [
            (qid, e.p_hat, e.p_con_hat, e.p_cri_hat, e.n_correct_support, e.n_wrong_support)
            for qid, e in zip(ids, estimates)
        ],
        out / "estimates.csv",
    )
    if stability is not None:
        save_table(
            ["round", "cl_hat", "cs_hat", "cl_weight", "cs_weight"],
            [(r.round, r.cl_hat, r.cs_hat, float(r.cl_weight), float(r.cs_weight)) for r in stability.per_round],
            out / "stability.csv",
        )
    write_json(_stanza(args), out / "run.json")
    correct_support = sum(e.n_correct_support for e in estimates)
    wrong_support = sum(e.n_wrong_support for e in estimates)
    try:
        cl, cs = aggregate_metrics(estimates)
    except DegenerateWeights as exc:
        print(
            f"error: {exc} (correct support={correct_support}, wrong support={wrong_support})",
            file=sys.stderr,
        )
        return 1
    acc0 = float(np.mean([e.p_hat for e in estimates]))
    params = derive_params(cl, cs, acc0)
    report = (
        f"CL={fmt(cl)}, CS={fmt(cs)}, Acc={fmt(acc0)}\n"
        f"{params_report(params)}\n"
        f"support: correct={correct_support}, wrong={wrong_support}\n"
    )
    _write_text(out / "report.txt", report)
    print(report, end="")
    return 0


def cmd_fit(args):
    curves = load_curves(args.curve)
    if not curves:
        raise UsageError(f"{args.curve}: no curve with data rows")
    name = args.column or next(iter(curves))
    if name not in curves:
        raise UsageError(f"{args.curve}: no column {name!r}; have {list(curves)}")
    curve = curves[name]
    result = fit_geometric(curve, noise_floor=args.noise_floor)
    out = ensure_dir(args.out)
    report = {
        "column": name,
        "upp": result.upp,
        "alpha": result.alpha,
        "acc0": result.acc0,
        "rmse": result.rmse,
        "max_abs_residual": result.max_abs_residual,
        "flat": result.flat,
        "descending": result.descending,
    }
    report = {k: float(fmt(v)) if isinstance(v, float) else v for k, v in report.items()}
    write_json(report, out / "fit.json")
    fitted = result.curve(curve.rounds)
    save_table(
        ["round", "observed", "fitted", "residual"],
        [(t, float(o), float(f), float(o - f)) for t, (o, f) in enumerate(zip(curve.values, fitted))],
        out / "fitted.csv",
    )
    write_json(_stanza(args), out / "run.json")
    print(f"upp={fmt(result.upp)}, alpha={fmt(result.alpha)}, acc0={fmt(result.acc0)}, rmse={fmt(result.rmse)}")
    if result.flat:
        print("warning: curve is flat; alpha is unidentifiable", file=sys.stderr)
    if result.descending:
        print("warning: descending curve (Upp < Acc0), the failure regime", file=sys.stderr)
    return 0


def _verify1(args, dataset, config, out):
    targets = args.targets or list(DEFAULT_TARGETS)
    curves = run_corollary1(dataset, targets, config, mode=args.mode, k_classes=args.classes)
    named = [(f"acc0={fmt(t)}", c) for t, c in zip(targets, curves)]
    save_curves(named, out / "curves.csv")
    finals = [c.values[-1] for c in curves]
    spread = max(finals) - min(finals)
    _, p_con, p_cri = dataset.arrays()
    lines = [f"final-round accuracy after {config.rounds} rounds:"]
    lines += [f"  {name}: {fmt(c.values[-1])}" for name, c in named]
    if np.ptp(p_con) == 0 and np.ptp(p_cri) == 0:
        params = derive_params(p_con[0], p_cri[0], 0.0)
        if not params.degenerate:
            lines.append(f"theory Upp={fmt(params.upp)}, alpha={fmt(params.alpha)}")
            lines.append(f"theory spread bound |alpha|^T={fmt(abs(params.alpha) ** config.rounds)}")
    lines.append(f"spread={fmt(spread)}")
    return lines


def _verify2(args, dataset, config, out):
    if args.compare is None:
        raise UsageError("corollary 2 needs --compare PROFILE")
    other = resolve_profile(args.compare)
    lines, named = [], []
    for label, data in (("A", dataset), ("B", other)):
        params = dataset_params(data, 0)
        try:
            needed = str(rounds_to_converge(params, args.epsilon))
        except NonConvergent:
            needed = "never"
        lines.append(f"{label}: {params_report(params)}, Acc0={fmt(params.acc0)}, rounds_to_converge={needed}")
        named.append((f"{label}_empirical", empirical_curve(simulate(data, config))))
        named.append((f"{label}_theory", closed_form_curve(params, config.rounds)))
    save_curves(named, out / "curves.csv")
    lines.append(f"epsilon={fmt(args.epsilon)}")
    return lines


def _verify3(args, dataset, config, out):
    curve = run_corollary3(dataset, config)
    p0, _, p_cri = dataset.arrays()
    acc0 = float(p0.mean())
    wrong = 1.0 - p0
    # round-0 critique score; irrelevant (set to 0) when every question starts correct
    cs = float(wrong @ p_cri / wrong.sum()) if wrong.sum() > 0 else 0.0
    theory = oracle_verifier_curve(min(cs, 1.0), acc0, max(config.rounds, 1))
    theory = AccuracyCurve(theory.values[: config.rounds + 1])
    resid = residuals(curve, theory)
    fit = goodness_of_fit(curve, theory)
    save_table(
        ["round", "empirical", "empirical_se", "theory", "residual", "within_3se"],
        [
            (t, float(curve.values[t]), float(curve.stderr[t]), float(theory.values[t]), float(resid[t]),
             str(bool(abs(resid[t]) <= 3 * curve.stderr[t])).lower())
            for t in range(len(curve))
        ],
        out / "curves.csv",
    )
    return [
        f"oracle verifier: CS={fmt(cs)}, Acc0={fmt(acc0)}",
        f"final accuracy={fmt(curve.values[-1])}",
        f"rmse={fmt(fit.rmse)}, max_abs_residual={fmt(fit.max_abs_residual)}, within_3se={str(fit.within_band).lower()}",
    ]


def cmd_verify(args):
    dataset = resolve_profile(args.profile)
    config = SimulationConfig(args.rounds, args.samples, args.seed, args.corollary == 3)
    out = ensure_dir(args.out)
    handler = {1: _verify1, 2: _verify2, 3: _verify3}[args.corollary]
    lines = handler(args, dataset, config, out)
    report = "\n".join(lines) + "\n"
    _write_text(out / "report.txt", report)
    write_json(_stanza(args), out / "run.json")
    print(report, end="")
    return 0


# -- wiring -----------------------------------------------------------------


def _common(p, rounds_default=5):
    p.add_argument("--rounds", type=_nonneg_int, default=rounds_default, help="self-correction rounds T")
    p.add_argument("--samples", type=_pos_int, default=5, help="samples per question M")
    p.add_argument("--seed", type=_seed, default=0, help="64-bit master seed")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="selfcorrect",
        description="Simulate, predict and estimate multi-round self-correction accuracy curves.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="simulate a transcript from a profile")
    p.add_argument("--profile", required=True, help=f"profile file or bundled name {bundled_profiles()}")
    _common(p)
    p.add_argument("--oracle-verifier", action="store_true", help="make correct answers absorbing")
    p.add_argument("--workers", type=_pos_int, default=1)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("predict", help="theoretical curve from (Acc0, CL, CS)")
    p.add_argument("--acc0", type=_probability, required=True)
    p.add_argument("--cl", type=_probability, required=True)
    p.add_argument("--cs", type=_probability, required=True)
    p.add_argument("--rounds", type=_pos_int, default=5)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("estimate", help="estimate CL/CS from a transcript or label snapshots")
    p.add_argument("--transcript")
    p.add_argument("--snapshots", help="classification label snapshots (JSON Lines)")
    p.add_argument("--round", type=_nonneg_int, default=0, help="estimate from rounds t -> t+1")
    p.add_argument("--pooled", action="store_true", help="merge transitions of all rounds")
    p.add_argument("--literal", action="store_true", help="unnormalised classification CS estimator")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("fit", help="fit (Upp, alpha, Acc0) to a curve table")
    p.add_argument("--curve", required=True)
    p.add_argument("--column", help="curve column to fit (default: first)")
    p.add_argument("--noise-floor", type=float, default=1e-6)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("verify", help="reproduce a corollary experiment")
    p.add_argument("corollary", type=int, choices=(1, 2, 3))
    p.add_argument("--profile", required=True)
    p.add_argument("--compare", help="second profile for corollary 2")
    _common(p, rounds_default=VERIFY_ROUNDS)
    p.add_argument("--targets", type=_targets, help="comma-separated initial accuracies (corollary 1)")
    p.add_argument("--mode", choices=("classification", "generation"), default="classification")
    p.add_argument("--classes", type=int, default=4, help="label count K for classification forcing")
    p.add_argument("--epsilon", type=float, default=1e-6, help="convergence tolerance (corollary 2)")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_verify)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        parser.error(str(exc))
    except SelfCorrectError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
