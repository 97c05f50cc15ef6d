"""``lipcert`` command-line interface.

Exit codes: 0 success, 1 usage error, 2 input or validation error,
3 bound not applicable / budget exceeded / unsupported norm pair,
4 internal consistency failure.
"""
from __future__ import annotations

import argparse
import json
import sys

from . import activations as acts
from .certificates import METHODS, CertifyOptions, certify, pattern_count, positivity_check
from .errors import (
    BudgetExceededError,
    InternalConsistencyError,
    LipcertError,
    NotApplicableError,
    UnsupportedNormError,
)
from .experiments import MonteCarloConfig, run_monte_carlo, run_tanh_toy
from .linalg import NormSpec
from .network import load

EXIT_OK, EXIT_USAGE, EXIT_INPUT, EXIT_NA, EXIT_INTERNAL = 0, 1, 2, 3, 4


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _positive_int(text):
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if value < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return value


def _seed(text):
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer seed, got {text!r}") from None
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError("seed must be a 64-bit unsigned integer")
    return value


def _dims(text):
    try:
        return tuple(int(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def build_parser():
    p = _Parser(prog="lipcert", description="Lipschitz certificates for layered networks.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    c = sub.add_parser("certify", help="certify a lipnet file")
    c.add_argument("netfile")
    c.add_argument("--method", choices=METHODS, default="auto")
    c.add_argument("--norm-in", default="2", help="p[:w1,w2,...], p may be inf")
    c.add_argument("--norm-out", default="2", help="p[:w1,w2,...], p may be inf")
    c.add_argument("--budget", type=_positive_int, default=None,
                   help="vartheta pattern budget (default: $LIPCERT_BUDGET or 2**24)")
    c.add_argument("--trials", type=_positive_int, default=64, help="starts for the sampled vartheta")
    c.add_argument("--seed", type=_seed, default=0)
    c.add_argument("--workers", type=_positive_int, default=1)
    c.add_argument("--json", action="store_true")
    c.add_argument("--timings", action="store_true", help="fill elapsed_ms (breaks byte-identical output)")

    i = sub.add_parser("inspect", help="summarise a lipnet file")
    i.add_argument("netfile")
    i.add_argument("--json", action="store_true")

    a = sub.add_parser("activations", help="activation catalog")
    asub = a.add_subparsers(dest="action", required=True, parser_class=_Parser)
    asub.add_parser("list", help="name, alpha and prox-representability")
    ac = asub.add_parser("certify", help="check the averagedness constant numerically")
    ac.add_argument("name", help="catalog entry, optionally with parameters, e.g. 'elu(beta=0.5)'")
    ac.add_argument("--alpha", type=float, default=None)
    ac.add_argument("--pairs", type=_positive_int, default=10_000)
    ac.add_argument("--seed", type=_seed, default=0)
    ac.add_argument("--json", action="store_true")

    e = sub.add_parser("experiment", help="reproduce a numerical study")
    e.add_argument("name", choices=("numeric", "tanh"))
    e.add_argument("--trials", type=_positive_int, default=200)
    e.add_argument("--seed", type=_seed, default=0)
    e.add_argument("--dims", type=_dims, default=(8, 10, 6, 3))
    e.add_argument("--vartheta", action="store_true")
    e.add_argument("--dump-trials", default=None, metavar="PATH")
    e.add_argument("--workers", type=_positive_int, default=1)
    e.add_argument("--json", action="store_true")
    return p


def _emit_json(obj, out):
    out.write(json.dumps(obj, indent=2) + "\n")


def _fmt(v):
    if v is None:
        return "-"
    if isinstance(v, bool):
        return "yes" if v else "no"
    if isinstance(v, float):
        return f"{v:.10g}"
    return str(v)


def cmd_certify(args, out):
    net = load(args.netfile)
    opts = CertifyOptions(
        norm_in=NormSpec.parse(args.norm_in), norm_out=NormSpec.parse(args.norm_out),
        vartheta_budget=args.budget, sample_trials=args.trials, seed=args.seed,
        method=args.method, workers=args.workers,
    )
    report = certify(net, opts)
    if not args.timings:
        report.elapsed_ms = None
    if args.json:
        _emit_json(report.to_dict(), out)
    else:
        for key, value in report.to_dict().items():
            out.write(f"{key:<22}{_fmt(value)}\n")
        for note in report.notes:
            out.write(f"note: {note}\n")
    return EXIT_OK


def cmd_inspect(args, out):
    net = load(args.netfile)
    layers = []
    for k, layer in enumerate(net.layers, start=1):
        layers.append({
            "layer": k,
            "dims": [layer.rows, layer.cols],
            "activation": acts.format_activation(layer.activation),
            "alpha": layer.alpha,
            "separable": layer.activation.separable,
        })
    summary = {
        "m": net.m,
        "dims": list(net.dims),
        "layers": layers,
        "hidden_separable": net.hidden_separable(),
        "vartheta_patterns": pattern_count(net) if net.hidden_separable() else None,
        "sign_factorisable": positivity_check(net).holds,
    }
    if args.json:
        _emit_json(summary, out)
        return EXIT_OK
    out.write(f"layers {net.m}, dims {' -> '.join(map(str, net.dims))}\n")
    for L in layers:
        out.write(f"  {L['layer']}: {L['dims'][0]}x{L['dims'][1]}  {L['activation']}  "
                  f"alpha={L['alpha']:.6g}  separable={_fmt(L['separable'])}\n")
    out.write(f"vartheta patterns: {_fmt(summary['vartheta_patterns'])}\n")
    out.write(f"sign-factorisable: {_fmt(summary['sign_factorisable'])}\n")
    return EXIT_OK


def cmd_activations(args, out):
    if args.action == "list":
        for name in acts.CATALOG:
            act = acts.builtin(name)
            prox = acts.check_prox_representable(act)
            out.write(f"{name}  {act.alpha:.5f}  {'yes' if prox else 'no'}\n")
        return EXIT_OK
    act = acts.parse_scalar(args.name)
    alpha = act.alpha if args.alpha is None else args.alpha
    plan = acts.SamplingPlan(pairs=args.pairs, seed=args.seed)
    rep = acts.certify_averagedness(act, alpha, plan)
    prox = acts.verify_prox_representation(act) if act.potential is not None else None
    passed = rep.passed and (prox is None or prox.passed)
    if args.json:
        _emit_json({
            "name": act.spec(), "alpha": alpha, "passed": passed,
            "worst_quotient_low": rep.worst_quotient_low,
            "worst_quotient_high": rep.worst_quotient_high,
            "pairs": rep.pairs, "seed": rep.seed,
            "prox_max_abs_gap": prox.max_abs_gap if prox else None,
        }, out)
    else:
        verdict = "pass" if rep.passed else "fail"
        out.write(f"{act.spec()}: alpha={alpha:.6g} {verdict} "
                  f"(quotients in [{rep.worst_quotient_low:.6g}, {rep.worst_quotient_high:.6g}], "
                  f"need [{1 - 2 * alpha:.6g}, 1])\n")
        if prox is not None:
            out.write(f"prox representation: {'pass' if prox.passed else 'fail'} "
                      f"(max gap {prox.max_abs_gap:.3g})\n")
    return EXIT_OK if passed else EXIT_INPUT


def cmd_experiment(args, out):
    if args.name == "tanh":
        rep = run_tanh_toy().to_dict()
        if args.json:
            _emit_json(rep, out)
        else:
            for k, v in rep.items():
                out.write(f"{k:<16}{v:.4f}\n")
        return EXIT_OK
    cfg = MonteCarloConfig(dims=args.dims, trials=args.trials, seed=args.seed,
                           vartheta=args.vartheta, workers=args.workers)
    res = run_monte_carlo(cfg)
    if args.dump_trials:
        res.dump_trials(args.dump_trials)
    rep = res.to_dict()
    if args.json:
        _emit_json(rep, out)
    else:
        out.write(f"dims {cfg.dims}, {cfg.trials} trials, seed {cfg.seed}\n")
        for key in ("theta_ratio", "linear_ratio", "vartheta_ratio"):
            s = rep[key]
            if s is not None:
                out.write(f"{key:<16}mean {s['mean']:.4f}  min {s['min']:.4f}  max {s['max']:.4f}\n")
    return EXIT_OK


COMMANDS = {"certify": cmd_certify, "inspect": cmd_inspect,
            "activations": cmd_activations, "experiment": cmd_experiment}


def main(argv=None, out=None):
    out = out or sys.stdout
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    try:
        return COMMANDS[args.command](args, out)
    except (NotApplicableError, BudgetExceededError, UnsupportedNormError) as exc:
        print(f"lipcert: {exc}", file=sys.stderr)
        return EXIT_NA
    except InternalConsistencyError as exc:
        print(f"lipcert: internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    except (LipcertError, OSError) as exc:
        print(f"lipcert: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
