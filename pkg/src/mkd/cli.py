"""Command-line interface: ``mkd {mmd,ksd,estimate,witness,coverage}``.

Results are written as JSON (schema ``mkd/1``) to ``--output`` and a short
summary goes to standard output; without ``--output`` the JSON itself is
printed.  Every default that influenced a number is echoed under
``resolved_config``.

Exit status: 0 success, 1 invalid configuration or input data, 2 numerical
failure, 3 I/O error.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys

import numpy as np

from . import __version__
from .asymptotics import SteinPairing, GMMPairing, asymptotic_covariance, confidence_set
from .data import load_data
from .discrepancy import WitnessFunction, ksd_squared, mmd_squared
from .errors import (
    ConfigError,
    DataIOError,
    DegenerateError,
    DimensionError,
    DomainError,
    MKDError,
    ModelKindError,
    NonFiniteError,
    ParseError,
    ScoreError,
    ShapeError,
    SingularError,
)
from .estimation import estimate_gmm, estimate_min_ksd_expfam, estimate_mmd_pushforward
from .kernels import (
    FeatureKernel,
    GaussianRBF,
    IdentityFeatures,
    InverseMultiquadric,
    RandomFourierFeatures,
    SteinKernel,
    median_heuristic,
)
from .models import gaussian_location_scale_instance, location_model, natural_to_moment
from .parallel import set_threads
from .simulation import SCENARIOS, coverage_simulation

SCHEMA = "mkd/1"
MEDIAN_SUBSAMPLE = 1000
COMMANDS = ("mmd", "ksd", "estimate", "witness", "coverage")
MODELS = ("gaussian-natparams", "pushforward-location")
METHODS = ("gmm", "ksd-expfam", "mmd-pushforward")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_IO = 0, 1, 2, 3

logger = logging.getLogger("mkd")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError([message])


def _common(p):
    g = p.add_argument_group("common")
    g.add_argument("--config", help="JSON config document with the same keys as the flags")
    g.add_argument("--output", help="path of the JSON result file")
    g.add_argument("--seed", default="0", help="RNG seed")
    g.add_argument("--threads", default=None, help="worker threads (default: available cores)")
    g.add_argument("--header", action="store_true", help="CSV inputs start with a header line")


def _kernel_flags(p, choices=("rbf", "imq", "linear", "rff")):
    g = p.add_argument_group("kernel")
    g.add_argument("--kernel", default="rbf", choices=choices, help="base kernel")
    g.add_argument("--lengthscale", default="median",
                   help="RBF/RFF lengthscale, a number or 'median' (median heuristic)")
    g.add_argument("--imq-scale", default="1.0", help="inverse multiquadric scale")
    g.add_argument("--imq-exponent", default="0.5", help="inverse multiquadric exponent in (0, 1)")
    g.add_argument("--rff-features", default="100", help="number of random Fourier features")
    g.add_argument("--rff-seed", default="0", help="seed of the random Fourier features")


def _optimizer_flags(p):
    g = p.add_argument_group("optimizer")
    g.add_argument("--tol-x", default="1e-8", help="relative simplex-diameter tolerance")
    g.add_argument("--tol-f", default="1e-12", help="objective-spread tolerance")
    g.add_argument("--max-iter", default=None, help="iteration budget (default 2000*p)")
    g.add_argument("--restarts", default="0", help="extra seeded Nelder-Mead restarts")
    g.add_argument("--model-samples", default=None, help="model sample count m (default max(n, 1024))")
    g.add_argument("--theta0", default=None, help="comma-separated starting point")


def build_parser():
    parser = _Parser(prog="mkd", description="Minimum kernel discrepancy estimation.",
                     formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    parser.add_argument("--version", action="version", version=f"mkd {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="command")
    fmt = argparse.ArgumentDefaultsHelpFormatter

    p = sub.add_parser("mmd", help="squared MMD between two samples", formatter_class=fmt)
    p.add_argument("--x", required=True, help="first sample (CSV or JSON)")
    p.add_argument("--y", required=True, help="second sample (CSV or JSON)")
    p.add_argument("--kind", default="V", choices=("V", "U"), help="V- or U-statistic")
    _kernel_flags(p)
    _common(p)

    p = sub.add_parser("ksd", help="squared kernel Stein discrepancy to a model", formatter_class=fmt)
    p.add_argument("--data", required=True, help="sample (CSV or JSON)")
    p.add_argument("--model", default="gaussian-natparams", choices=("gaussian-natparams",))
    p.add_argument("--theta", required=True, help="comma-separated model parameter")
    p.add_argument("--kind", default="V", choices=("V", "U"), help="V- or U-statistic")
    _kernel_flags(p, ("rbf", "imq"))
    _common(p)

    p = sub.add_parser("estimate", help="minimum kernel discrepancy estimate", formatter_class=fmt)
    p.add_argument("--method", required=True, choices=METHODS)
    p.add_argument("--model", default=None, choices=MODELS,
                   help="model (gaussian-natparams for ksd-expfam, pushforward-location for mmd-pushforward)")
    p.add_argument("--data", required=True, help="sample (CSV or JSON)")
    p.add_argument("--features", default="identity", choices=("identity", "rff"),
                   help="feature map for the gmm method")
    p.add_argument("--gamma", default="0.95", help="confidence level")
    p.add_argument("--lower", default=None, help="comma-separated lower parameter bounds")
    p.add_argument("--upper", default=None, help="comma-separated upper parameter bounds")
    _kernel_flags(p, ("rbf", "imq"))
    _optimizer_flags(p)
    _common(p)

    p = sub.add_parser("witness", help="witness function between two samples", formatter_class=fmt)
    p.add_argument("--x", required=True, help="first sample (CSV or JSON)")
    p.add_argument("--y", required=True, help="second sample (CSV or JSON)")
    p.add_argument("--points", default=None, help="evaluation points (default: all atoms of x then y)")
    _kernel_flags(p)
    _common(p)

    p = sub.add_parser("coverage", help="confidence-set coverage simulation", formatter_class=fmt)
    p.add_argument("--scenario", required=True, choices=SCENARIOS)
    p.add_argument("--n", default="2000", help="sample size per replicate")
    p.add_argument("--replicates", default="500", help="number of replicates")
    p.add_argument("--gamma", default="0.95", help="confidence level")
    p.add_argument("--dim", default="1", help="data dimension")
    p.add_argument("--lengthscale", default="1.0", help="RBF lengthscale of the Stein kernel scenario")
    p.add_argument("--text", action="store_true", help="print the plain-text table instead of JSON summary")
    _common(p)
    return parser


# -- config files ---------------------------------------------------------

def _config_tokens(path):
    """Turn a JSON config mapping into flag tokens placed before the real flags."""
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise DataIOError(f"--config: cannot read {path}: {exc.strerror or exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError([f"--config: {path} is not valid JSON ({exc.msg})"]) from exc
    if not isinstance(doc, dict):
        raise ConfigError(["--config: top level must be an object"])
    command = doc.pop("command", None)
    tokens = []
    for key, value in doc.items():
        flag = "--" + key.replace("_", "-")
        if value is True:
            tokens.append(flag)
        elif value is False or value is None:
            continue
        elif isinstance(value, list):
            tokens += [flag, ",".join(str(v) for v in value)]
        else:
            tokens += [flag, str(value)]
    return command, tokens


def parse_args(argv):
    argv = list(argv)
    config_path = None
    for i, tok in enumerate(argv):
        if tok == "--config" and i + 1 < len(argv):
            config_path = argv[i + 1]
        elif tok.startswith("--config="):
            config_path = tok.split("=", 1)[1]
    parser = build_parser()
    if config_path is not None:
        command, tokens = _config_tokens(config_path)
        if argv and argv[0] in COMMANDS:
            command, rest = argv[0], argv[1:]
        else:
            rest = argv
        if command is None:
            raise ConfigError(["no command given on the command line or in --config"])
        argv = [command] + tokens + rest
    args = parser.parse_args(argv)
    if args.command is None:
        raise ConfigError(["no command given; choose one of " + ", ".join(COMMANDS)])
    return args


# -- validation -----------------------------------------------------------

class _Checker:
    def __init__(self, args):
        self.args = args
        self.problems = []

    def number(self, key, kind=float, minimum=None, maximum=None, strict=False, optional=False):
        raw = getattr(self.args, key)
        flag = "--" + key.replace("_", "-")
        if raw is None:
            if not optional:
                self.problems.append(f"{flag}: a value is required")
            return None
        try:
            value = kind(raw) if kind is float else int(str(raw))
        except ValueError:
            self.problems.append(f"{flag}: {raw!r} is not a valid {'number' if kind is float else 'integer'}")
            return None
        if kind is float and not math.isfinite(value):
            self.problems.append(f"{flag}: must be finite")
            return None
        if minimum is not None and (value <= minimum if strict else value < minimum):
            self.problems.append(f"{flag}: must be {'>' if strict else '>='} {minimum}, got {raw}")
        if maximum is not None and (value >= maximum if strict else value > maximum):
            self.problems.append(f"{flag}: must be {'<' if strict else '<='} {maximum}, got {raw}")
        return value

    def vector(self, key, optional=True):
        raw = getattr(self.args, key)
        if raw is None:
            if not optional:
                self.problems.append(f"--{key.replace('_', '-')}: a value is required")
            return None
        try:
            vec = np.array([float(v) for v in str(raw).split(",")])
        except ValueError:
            self.problems.append(f"--{key.replace('_', '-')}: {raw!r} is not a comma-separated list of numbers")
            return None
        if not np.all(np.isfinite(vec)):
            self.problems.append(f"--{key.replace('_', '-')}: entries must be finite")
            return None
        return vec

    def path(self, key):
        raw = getattr(self.args, key)
        if raw is not None and not str(raw).strip():
            self.problems.append(f"--{key}: empty path")
        return raw


def validate(args) -> dict:
    """Check every field, collecting all problems before raising :class:`ConfigError`."""
    c = _Checker(args)
    cfg = {"command": args.command}
    cfg["seed"] = c.number("seed", int, minimum=0)
    cfg["threads"] = c.number("threads", int, minimum=1, optional=True)
    cfg["header"] = bool(args.header)

    if hasattr(args, "kernel") and args.command != "coverage":
        cfg["kernel"] = args.kernel
        if args.lengthscale == "median":
            cfg["lengthscale"] = "median"
        else:
            cfg["lengthscale"] = c.number("lengthscale", minimum=0, strict=True)
        cfg["imq_scale"] = c.number("imq_scale", minimum=0, strict=True)
        cfg["imq_exponent"] = c.number("imq_exponent", minimum=0, maximum=1, strict=True)
        cfg["rff_features"] = c.number("rff_features", int, minimum=1)
        cfg["rff_seed"] = c.number("rff_seed", int, minimum=0)
        cfg["median_subsample"] = MEDIAN_SUBSAMPLE

    if args.command in ("mmd", "witness"):
        cfg["x"], cfg["y"] = c.path("x"), c.path("y")
        if args.command == "mmd":
            cfg["kind"] = args.kind
        else:
            cfg["points"] = c.path("points")
    elif args.command == "ksd":
        cfg["data"] = c.path("data")
        cfg["model"] = args.model
        cfg["kind"] = args.kind
        cfg["theta"] = c.vector("theta", optional=False)
    elif args.command == "estimate":
        cfg["data"] = c.path("data")
        cfg["method"] = args.method
        model = args.model
        expected = {"ksd-expfam": "gaussian-natparams", "mmd-pushforward": "pushforward-location"}
        if args.method in expected:
            if model is None:
                model = expected[args.method]
            elif model != expected[args.method]:
                c.problems.append(f"--model: method {args.method} needs model {expected[args.method]}, got {model}")
        elif model is not None:
            c.problems.append("--model: the gmm method uses the identified moment parametrisation; omit --model")
        cfg["model"] = model
        cfg["features"] = args.features
        cfg["gamma"] = c.number("gamma", minimum=0, maximum=1, strict=True)
        cfg["lower"], cfg["upper"] = c.vector("lower"), c.vector("upper")
        cfg["theta0"] = c.vector("theta0")
        cfg["tol_x"] = c.number("tol_x", minimum=0, strict=True)
        cfg["tol_f"] = c.number("tol_f", minimum=0, strict=True)
        cfg["max_iter"] = c.number("max_iter", int, minimum=1, optional=True)
        cfg["restarts"] = c.number("restarts", int, minimum=0)
        cfg["model_samples"] = c.number("model_samples", int, minimum=1, optional=True)
    elif args.command == "coverage":
        cfg["scenario"] = args.scenario
        cfg["n"] = c.number("n", int, minimum=2)
        cfg["replicates"] = c.number("replicates", int, minimum=1)
        cfg["gamma"] = c.number("gamma", minimum=0, maximum=1, strict=True)
        cfg["dim"] = c.number("dim", int, minimum=1)
        cfg["lengthscale"] = c.number("lengthscale", minimum=0, strict=True)
    if c.problems:
        raise ConfigError(c.problems)
    return cfg


# -- commands -------------------------------------------------------------

def _lengthscale(cfg, X):
    if cfg["lengthscale"] == "median":
        return median_heuristic(X, max_rows=MEDIAN_SUBSAMPLE, seed=cfg["seed"])
    return cfg["lengthscale"]


def _base_kernel(cfg, X):
    """Build the configured kernel; returns ``(kernel, resolved kernel parameters)``."""
    name = cfg["kernel"]
    if name == "rbf":
        ls = _lengthscale(cfg, X)
        return GaussianRBF(ls), {"kernel": "rbf", "lengthscale_used": ls}
    if name == "imq":
        return (InverseMultiquadric(cfg["imq_scale"], cfg["imq_exponent"]),
                {"kernel": "imq", "imq_scale": cfg["imq_scale"], "imq_exponent": cfg["imq_exponent"]})
    if name == "linear":
        return FeatureKernel(IdentityFeatures(X.shape[1])), {"kernel": "linear"}
    ls = _lengthscale(cfg, X)
    phi = RandomFourierFeatures(X.shape[1], cfg["rff_features"], ls, cfg["rff_seed"])
    return FeatureKernel(phi), {"kernel": "rff", "lengthscale_used": ls,
                                "rff_features": cfg["rff_features"], "rff_seed": cfg["rff_seed"]}


def _load(cfg, key):
    return load_data(cfg[key], has_header=cfg["header"]).samples


def cmd_mmd(cfg):
    X, Y = _load(cfg, "x"), _load(cfg, "y")
    if X.shape[1] != Y.shape[1]:
        raise DimensionError(f"--x has d={X.shape[1]} but --y has d={Y.shape[1]}")
    kernel, kinfo = _base_kernel(cfg, np.vstack([X, Y]))
    res = mmd_squared(kernel, X, Y, cfg["kind"])
    out = {"mmd2": res.squared, "mmd": res.value, "kind": res.kind, "n": res.n, "m": res.m}
    out.update(kinfo)
    cfg.update(kinfo)
    summary = f"MMD^2 ({res.kind}) = {res.squared:.10g}  (n={res.n}, m={res.m})"
    return out, summary


def cmd_ksd(cfg):
    X = _load(cfg, "data")
    model = gaussian_location_scale_instance(X.shape[1])
    if cfg["theta"].size != model.p:
        raise DimensionError(f"--theta: expected {model.p} values for d={X.shape[1]}, got {cfg['theta'].size}")
    kernel, kinfo = _base_kernel(cfg, X)
    res = ksd_squared(SteinKernel(kernel, model), X, cfg["theta"], cfg["kind"])
    out = {"ksd2": res.squared, "ksd": res.value, "kind": res.kind, "n": res.n,
           "theta": cfg["theta"].tolist()}
    out.update(kinfo)
    cfg.update(kinfo)
    return out, f"KSD^2 ({res.kind}) = {res.squared:.10g}  (n={res.n})"


def _bounds(cfg, p):
    lo, hi = cfg["lower"], cfg["upper"]
    for key, vec in (("lower", lo), ("upper", hi)):
        if vec is not None and vec.size not in (1, p):
            raise ConfigError([f"--{key}: expected 1 or {p} values, got {vec.size}"])
    return lo, hi


def cmd_estimate(cfg):
    X = _load(cfg, "data")
    n, d = X.shape
    method = cfg["method"]
    out = {"method": method, "n": n, "d": d}
    pairing = None
    if method == "gmm":
        if cfg["features"] == "rff":
            ls = _lengthscale(cfg, X)
            phi = RandomFourierFeatures(d, cfg["rff_features"], ls, cfg["rff_seed"])
            cfg.update(lengthscale_used=ls)
        else:
            phi = IdentityFeatures(d)
        est = estimate_gmm(phi, X)
        pairing = GMMPairing(phi)
    elif method == "ksd-expfam":
        lo, hi = _bounds(cfg, 2 * d)
        model = gaussian_location_scale_instance(d, lower=lo, upper=hi)
        kernel, kinfo = _base_kernel(cfg, X)
        cfg.update(kinfo)
        est = estimate_min_ksd_expfam(model, kernel, X)
        pairing = SteinPairing(SteinKernel(kernel, model))
        mu, sigma = natural_to_moment_safe(est.theta_n)
        if mu is not None:
            out["moment_parameters"] = {"mu": mu.tolist(), "sigma": sigma.tolist()}
    else:
        lo, hi = _bounds(cfg, d)
        model = location_model(d, lower=lo, upper=hi)
        kernel, kinfo = _base_kernel(cfg, X)
        cfg.update(kinfo)
        m = cfg["model_samples"] or max(n, 1024)
        cfg["model_samples"] = m
        cfg["max_iter"] = cfg["max_iter"] or 2000 * d
        theta0 = cfg["theta0"]
        if theta0 is None:
            theta0 = model.domain.clip(X.mean(axis=0))
            cfg["theta0"] = theta0
        est = estimate_mmd_pushforward(model, kernel, X, m=m, seed=cfg["seed"], theta0=theta0,
                                       tol_x=cfg["tol_x"], tol_f=cfg["tol_f"],
                                       max_iter=cfg["max_iter"], restarts=cfg["restarts"])
    out["estimate"] = est.to_dict()
    summary = f"theta_n = {np.array2string(est.theta_n, precision=6)}  ({est.method})"
    if pairing is None:
        out["uncertainty"] = None
        out["uncertainty_note"] = ("sandwich covariance is not available for the pushforward MMD "
                                   "pathway (needs parameter derivatives of a sampled kernel mean)")
        return out, summary
    cov = asymptotic_covariance(pairing, X, est.theta_n)
    cs = confidence_set(est.theta_n, cov, n, cfg["gamma"])
    out["uncertainty"] = cov.to_dict()
    out["confidence_set"] = cs.to_dict()
    out["confidence_intervals"] = {"level": cfg["gamma"], "intervals": cs.intervals().tolist()}
    return out, summary


def natural_to_moment_safe(theta):
    try:
        return natural_to_moment(theta)
    except DomainError:
        return None, None


def cmd_witness(cfg):
    X, Y = _load(cfg, "x"), _load(cfg, "y")
    if X.shape[1] != Y.shape[1]:
        raise DimensionError(f"--x has d={X.shape[1]} but --y has d={Y.shape[1]}")
    kernel, kinfo = _base_kernel(cfg, np.vstack([X, Y]))
    cfg.update(kinfo)
    w = WitnessFunction(kernel, X, Y)
    Z = _load(cfg, "points") if cfg["points"] is not None else np.vstack([X, Y])
    if Z.shape[1] != X.shape[1]:
        raise DimensionError(f"--points has d={Z.shape[1]}, samples have d={X.shape[1]}")
    out = {"mmd": w.normalizer, "rkhs_norm": w.rkhs_norm(), "points": Z.tolist(),
           "values": w(Z).tolist()}
    out.update(kinfo)
    return out, f"witness evaluated at {Z.shape[0]} points; MMD = {w.normalizer:.10g}"


def cmd_coverage(cfg):
    rep = coverage_simulation(cfg["scenario"], cfg["replicates"], cfg["n"], cfg["gamma"],
                              seed=cfg["seed"], dim=cfg["dim"], lengthscale=cfg["lengthscale"])
    return rep.to_dict(), rep.to_text()


COMMAND_FUNCS = {"mmd": cmd_mmd, "ksd": cmd_ksd, "estimate": cmd_estimate,
                 "witness": cmd_witness, "coverage": cmd_coverage}


def _jsonable(value):
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, (np.floating, np.integer)):
        return value.item()
    if isinstance(value, dict):
        return {k: _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    return value


def run(cfg, stdout=None) -> int:
    """Execute a validated config; returns the exit status."""
    stdout = stdout or sys.stdout
    set_threads(cfg.get("threads"))
    result, summary = COMMAND_FUNCS[cfg["command"]](cfg)
    resolved = {k: v for k, v in cfg.items() if k != "threads"}
    doc = {"schema": SCHEMA, "command": cfg["command"]}
    doc.update(result)
    doc["resolved_config"] = resolved
    text = json.dumps(_jsonable(doc), indent=2, allow_nan=True)
    out_path = cfg.get("output")
    if out_path:
        try:
            with open(out_path, "w", encoding="utf-8") as fh:
                fh.write(text + "\n")
        except OSError as exc:
            raise DataIOError(f"--output: cannot write {out_path}: {exc.strerror or exc}") from exc
        print(summary, file=stdout)
    else:
        print(text, file=stdout)
    return EXIT_OK


def exit_code(exc) -> int:
    if isinstance(exc, (DataIOError, OSError)) and not isinstance(exc, (ParseError,)):
        return EXIT_IO
    if isinstance(exc, (SingularError, NonFiniteError, DegenerateError, ScoreError)):
        return EXIT_NUMERIC
    return EXIT_CONFIG


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="mkd: %(levelname)s: %(message)s")
    argv = sys.argv[1:] if argv is None else argv
    try:
        args = parse_args(argv)
        cfg = validate(args)
        cfg["output"] = args.output
        return run(cfg)
    except ConfigError as exc:
        for problem in exc.problems:
            print(f"mkd: error: {problem}", file=sys.stderr)
        return EXIT_CONFIG
    except (MKDError, OSError) as exc:
        print(f"mkd: error: {exc}", file=sys.stderr)
        return exit_code(exc)


if __name__ == "__main__":
    sys.exit(main())
