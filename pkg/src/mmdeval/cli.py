"""Command line front end.

Every command prints one JSON document ``{command, params, result, version,
wall_time}`` on stdout; diagnostics go to stderr.  Exit status is 0 on
success, 1 for bad input (including usage errors) and 2 for numerical
failures.
"""

import argparse
import json
import logging
import sys
import time

import numpy as np

from . import __version__
from .biaslab import (
    fid_1d_expectation_check,
    fid_ordering_reversal_1d,
    fid_ordering_reversal_relu,
    max_mmd_splitting_bias,
    score_bias_curves,
    wasserstein_splitting_bias,
)
from .errors import FeatureFileError, InputError, NumericalError
from .estimators import mmd2_biased, mmd2_block_average, mmd2_unbiased, kid
from .gradnet import GaussianSampler, Net, gradient_unbiasedness_mc, random_gradcheck
from .io import load_features, save_features
from .kernels import parse_kernel
from .numeric import RngState
from .relative import AdaptationState, ControllerConfig, lr_controller_step, relative_similarity_test
from .scores import _frechet, fit_moments, inception_score

log = logging.getLogger("mmdeval")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _floats(text):
    try:
        return tuple(float(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _ints(text):
    try:
        return tuple(int(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _kernel(args):
    return parse_kernel(args.kernel, sigmas=args.sigmas, alphas=args.alphas, beta=args.beta)


def _load(path, args):
    return load_features(path, getattr(args, "format", None))


def cmd_mmd(args):
    X, Y = _load(args.x, args), _load(args.y, args)
    spec = _kernel(args)
    if args.estimator == "unbiased":
        est = mmd2_unbiased(spec, X, Y)
    elif args.estimator == "biased":
        est = mmd2_biased(spec, X, Y)
    else:
        _need_seed(args)
        est = mmd2_block_average(spec, X, Y, args.block, args.reps, RngState(args.seed), args.threads)
    return est.to_dict()


def cmd_kid(args):
    _need_seed(args)
    X, Y = _load(args.x, args), _load(args.y, args)
    est = kid(X, Y, RngState(args.seed), args.block, args.reps, args.threads)
    return est.to_dict()


def cmd_fid(args):
    X, Y = _load(args.x, args), _load(args.y, args)
    value, clamped = _frechet(fit_moments(X), fit_moments(Y))
    return {"value": value, "clamped": clamped}


def cmd_inception(args):
    return {"value": inception_score(_load(args.probs, args))}


def cmd_relative(args):
    _need_seed(args)
    res = relative_similarity_test(
        _kernel(args),
        _load(args.candidate, args),
        _load(args.baseline, args),
        _load(args.reference, args),
        RngState(args.seed),
        args.variance,
    )
    return res.to_dict()


def cmd_lr_adapt(args):
    cfg = ControllerConfig(args.alpha, args.patience, args.decay, args.min_lr)
    state = AdaptationState(args.lr, 0, cfg)
    fh = sys.stdin if args.input in (None, "-") else open(args.input)
    steps = []
    try:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            try:
                p = float(line)
            except ValueError:
                raise InputError(f"not a p-value: {line!r}") from None
            state, action = lr_controller_step(state, p)
            steps.append({"p_value": p, "action": action, "lr": state.lr,
                          "consecutive_failures": state.consecutive_failures})
    finally:
        if fh is not sys.stdin:
            fh.close()
    return {"steps": steps, "final_lr": state.lr}


def cmd_bias(args):
    _need_seed(args)
    rng = RngState(args.seed)
    exp = args.experiment
    if exp == "wasserstein":
        report = wasserstein_splitting_bias(args.reps, rng, args.stubborn)
    elif exp == "max-mmd":
        report = max_mmd_splitting_bias(args.m_tr, args.n_tr, args.reps, rng)
    elif exp in ("kid-curve", "fid-curve"):
        report = score_bias_curves(exp[:3], args.d, args.pair, args.n_list, args.reps, rng, args.shift)
    elif exp == "fid-1d":
        report = fid_1d_expectation_check(args.mu_p, args.sigma_p, args.mu_q, args.sigma_q,
                                          args.m, args.n, args.reps, rng)
    elif exp == "fid-reversal-1d":
        report = fid_ordering_reversal_1d(args.m, args.reps, rng)
    else:
        report = fid_ordering_reversal_relu(args.d, args.m_list, rng, args.mc_samples, args.reps)
    return report


def cmd_gradcheck(args):
    _need_seed(args)
    spec = _kernel(args)
    rng = RngState(args.seed)
    if args.mode == "fd":
        report = random_gradcheck(args.critic, spec, rng, args.n, args.generator, args.epsilon)
    else:
        critic = Net.random(args.critic, rng.derive(1))
        generator = Net.random(args.generator, rng.derive(2)) if args.generator else None
        z_dim = generator.input_dim if generator else args.critic[0]
        data = GaussianSampler(np.full(args.critic[0], args.data_shift))
        noise = GaussianSampler(np.zeros(z_dim))
        report = gradient_unbiasedness_mc(critic, generator, spec, data, noise, args.m, args.reps,
                                          rng.derive(3), args.proxy_n, args.proxy_block, args.threads)
    out = report.to_dict()
    out["n_params"] = len(out["analytic"])
    return out


def cmd_convert(args):
    X = load_features(args.src, args.from_format)
    save_features(args.dst, X, args.to_format)
    return {"rows": X.shape[0], "cols": X.shape[1], "dst": args.dst}


def _need_seed(args):
    if args.seed is None:
        raise InputError(f"{args.command} is randomized and requires --seed")


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, help="seed for all randomness (required by randomized commands)")
    common.add_argument("--threads", type=int, default=1, help="worker cap; never changes results")
    common.add_argument("--output", choices=("json", "csv"), default="json",
                        help="csv is available for bias-demo tables")
    common.add_argument("--format", choices=("binary", "csv"), help="feature file format (default: by extension)")

    kern = argparse.ArgumentParser(add_help=False)
    kern.add_argument("--kernel", default="rq", help="e.g. rbf:2,5,10 | rq | rq-dot | dot | dist:beta=1 | poly:deg=3")
    kern.add_argument("--sigmas", type=_floats, help="RBF lengthscales when --kernel rbf has none")
    kern.add_argument("--alphas", type=_floats, help="RQ alphas when --kernel rq/rq-dot has none")
    kern.add_argument("--beta", type=float, help="exponent for the distance kernel")

    p = _Parser(prog="mmdeval", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("mmd", parents=[common, kern], help="squared MMD estimate")
    s.add_argument("--x", required=True)
    s.add_argument("--y", required=True)
    s.add_argument("--estimator", choices=("unbiased", "biased", "block"), default="unbiased")
    s.add_argument("--block", type=int, default=1000)
    s.add_argument("--reps", type=int, default=100)
    s.set_defaults(func=cmd_mmd)

    s = sub.add_parser("kid", parents=[common], help="Kernel Inception Distance")
    s.add_argument("--x", required=True)
    s.add_argument("--y", required=True)
    s.add_argument("--block", type=int, default=1000, help="0 means the smaller sample size")
    s.add_argument("--reps", type=int, default=100)
    s.set_defaults(func=cmd_kid)

    s = sub.add_parser("fid", parents=[common], help="plug-in FID")
    s.add_argument("--x", required=True)
    s.add_argument("--y", required=True)
    s.set_defaults(func=cmd_fid)

    s = sub.add_parser("inception-score", parents=[common], help="Inception score of class probabilities")
    s.add_argument("--probs", required=True)
    s.set_defaults(func=cmd_inception)

    s = sub.add_parser("relative-test", parents=[common, kern], help="relative similarity test")
    s.add_argument("--candidate", required=True)
    s.add_argument("--baseline", required=True)
    s.add_argument("--reference", required=True)
    s.add_argument("--variance", choices=("unbiased", "first-order"), default="unbiased")
    s.set_defaults(func=cmd_relative)

    s = sub.add_parser("lr-adapt", parents=[common], help="learning-rate decisions from p-values, one per line")
    s.add_argument("--input", help="file of p-values (default stdin)")
    s.add_argument("--lr", type=float, default=1e-4)
    s.add_argument("--alpha", type=float, default=0.05)
    s.add_argument("--patience", type=int, default=3)
    s.add_argument("--decay", type=float, default=0.5)
    s.add_argument("--min-lr", type=float, default=0.0)
    s.set_defaults(func=cmd_lr_adapt)

    s = sub.add_parser("bias-demo", parents=[common], help="estimator bias experiments")
    s.add_argument("experiment", choices=("wasserstein", "max-mmd", "kid-curve", "fid-curve",
                                          "fid-1d", "fid-reversal-1d", "fid-reversal-relu"))
    s.add_argument("--reps", type=int, default=10_000)
    s.add_argument("--stubborn", action="store_true")
    s.add_argument("--m-tr", type=int, default=2)
    s.add_argument("--n-tr", type=int, default=2)
    s.add_argument("--d", type=int, default=16)
    s.add_argument("--pair", choices=("same", "shifted"), default="same")
    s.add_argument("--shift", type=float, default=1.0)
    s.add_argument("--n-list", type=_ints, default=(10, 100, 1000))
    s.add_argument("--m", type=int, default=10)
    s.add_argument("--n", type=int, default=50)
    s.add_argument("--mu-p", type=float, default=0.0)
    s.add_argument("--sigma-p", type=float, default=1.0)
    s.add_argument("--mu-q", type=float, default=1.0)
    s.add_argument("--sigma-q", type=float, default=2.0)
    s.add_argument("--m-list", type=_ints, default=(640, 6400))
    s.add_argument("--mc-samples", type=int, default=10**6)
    s.set_defaults(func=cmd_bias)

    s = sub.add_parser("gradcheck", parents=[common, kern], help="gradient checks for MMD losses through ReLU nets")
    s.add_argument("--mode", choices=("fd", "mc"), default="fd",
                   help="fd: central differences; mc: minibatch-mean vs large-sample gradient")
    s.add_argument("--critic", type=_ints, default=(8, 16, 4), help="critic layer sizes")
    s.add_argument("--generator", type=_ints, help="generator layer sizes (optional)")
    s.add_argument("--epsilon", type=float, default=1e-5)
    s.add_argument("--n", type=int, default=16, help="samples per side for fd mode")
    s.add_argument("--m", type=int, default=8, help="minibatch size for mc mode")
    s.add_argument("--reps", type=int, default=10_000)
    s.add_argument("--proxy-n", type=int, default=10**5)
    s.add_argument("--proxy-block", type=int, default=1000)
    s.add_argument("--data-shift", type=float, default=0.5)
    s.set_defaults(func=cmd_gradcheck)

    s = sub.add_parser("convert", parents=[common], help="convert feature files between csv and binary")
    s.add_argument("src")
    s.add_argument("dst")
    s.add_argument("--from", dest="from_format", choices=("binary", "csv"))
    s.add_argument("--to", dest="to_format", choices=("binary", "csv"))
    s.set_defaults(func=cmd_convert)
    return p


_NOT_PARAMS = {"func", "command"}


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


def run(argv=None, stdout=None):
    """Parse ``argv``, run the command and return the exit status."""
    stdout = stdout or sys.stdout
    logging.basicConfig(level=logging.WARNING, stream=sys.stderr, format="%(name)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    start = time.perf_counter()
    try:
        result = args.func(args)
    except FeatureFileError as exc:
        log.error("[%s] %s", exc.code, exc)
        return 1
    except InputError as exc:
        log.error("%s", exc)
        return 1
    except NumericalError as exc:
        log.error("numerical failure: %s", exc)
        return 2
    if hasattr(result, "to_csv") and args.output == "csv":
        stdout.write(result.to_csv())
        return 0
    if hasattr(result, "to_dict"):
        result = result.to_dict()
    params = {k: v for k, v in vars(args).items() if k not in _NOT_PARAMS}
    doc = {
        "command": args.command,
        "params": _jsonable(params),
        "result": _jsonable(result),
        "version": __version__,
        "wall_time": round(time.perf_counter() - start, 6),
    }
    stdout.write(json.dumps(doc, sort_keys=True) + "\n")
    return 0


def main():
    sys.exit(run())
