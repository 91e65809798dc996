"""Command-line front end.

Exit codes: 0 success, 1 usage or input error, 2 diverged, 3 verification
failure.
"""

import argparse
import json
import math
import os
import sys
import time
import warnings

import numpy as np

from .invariants import run_instance_suite
from .lp_space import StructuralError
from .problem import DEFAULT_MODULI, SspvipInstance, generate_instance
from .retractions import SET_KINDS
from .solver import (InfeasibleCertificateWarning, SolverConfig, certificate,
                     solve_sspvip, suggest_parameters)

EXIT_OK, EXIT_USAGE, EXIT_DIVERGED, EXIT_VERIFY = 0, 1, 2, 3
TRACE_HEADER = ("n", "r1", "r2", "r3", "r4", "err_star", "step", "theta_bound_rhs")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _seed(text):
    v = int(text, 0)
    if not 0 <= v < 2 ** 64:
        raise argparse.ArgumentTypeError("seed must be a 64-bit unsigned integer")
    return v


def _alpha(text):
    if text == "harmonic":
        return text
    try:
        return float(text)
    except ValueError:
        raise argparse.ArgumentTypeError("alpha must be a number or 'harmonic'")


def _moduli(text):
    try:
        vals = tuple(float(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError("moduli must be 8 comma-separated numbers")
    if len(vals) != 8:
        raise argparse.ArgumentTypeError(
            "moduli must be alpha1,beta1,alpha2,beta2,sigma1,eta1,sigma2,eta2")
    return vals


def build_parser():
    p = _Parser(prog="sspvip", description=__doc__.splitlines()[0])
    p.add_argument("--command", required=True,
                   choices=("generate", "certify", "solve", "verify"))
    p.add_argument("--instance", help="instance file (JSON); generated from --seed if absent")
    p.add_argument("--out", help="output file (generate, certify, verify) or directory (solve)")
    p.add_argument("--seed", type=_seed, default=0)
    g = p.add_argument_group("solver")
    g.add_argument("--lambda", dest="lam", type=float)
    g.add_argument("--gamma", dest="gam", type=float)
    g.add_argument("--rho", type=float)
    g.add_argument("--alpha", type=_alpha, default=0.9,
                   help="constant relaxation in (0, 1] or 'harmonic'")
    g.add_argument("--max-iters", type=int, default=10_000)
    g.add_argument("--tol-residual", type=float, default=1e-10)
    g.add_argument("--tol-step", type=float, default=1e-15)
    g = p.add_argument_group("generator")
    g.add_argument("--p1", type=float, default=2.0)
    g.add_argument("--p2", type=float, default=2.0)
    g.add_argument("--dim1", type=int, default=4)
    g.add_argument("--dim2", type=int, default=3)
    g.add_argument("--set1", choices=SET_KINDS, default="box")
    g.add_argument("--set2", choices=SET_KINDS, default="box")
    g.add_argument("--moduli", type=_moduli, default=DEFAULT_MODULI)
    g.add_argument("--map-kind", choices=("componentwise", "diagonal"),
                   default="componentwise")
    g.add_argument("--active-fraction", type=float, default=0.0)
    g.add_argument("--record-time", action="store_true",
                   help="add wall time to the solve summary (breaks byte-reproducibility)")
    return p


def _clean(obj):
    """JSON-safe copy: NaN/inf become None, numpy scalars become Python floats."""
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    return obj


def dump_json(obj):
    return json.dumps(_clean(obj), indent=2, allow_nan=False) + "\n"


def _fmt(v):
    if v is None or (isinstance(v, float) and math.isnan(v)):
        return ""
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return format(float(v), ".17g")


def format_trace(trace):
    lines = [",".join(TRACE_HEADER)]
    lines += [",".join(_fmt(v) for v in row) for row in trace.rows()]
    return "\n".join(lines) + "\n"


def _write(path, text):
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        with open(path, "w") as fh:
            fh.write(text)


def load_or_generate(args):
    if args.instance:
        try:
            return SspvipInstance.load(args.instance)
        except OSError as exc:
            raise UsageError(f"cannot read instance: {exc}") from exc
    return generate_instance(args.seed, (args.dim1, args.dim2), args.p1, args.p2,
                             args.moduli, (args.set1, args.set2), args.map_kind,
                             active_fraction=args.active_fraction)


def make_config(args, inst):
    lam, gam, rho = args.lam, args.gam, args.rho
    if lam is None or gam is None or rho is None:
        s_lam, s_gam, s_rho = suggest_parameters(inst)
        lam = s_lam if lam is None else lam
        gam = s_gam if gam is None else gam
        rho = s_rho if rho is None else rho
    return SolverConfig(lam, gam, rho, args.alpha, max_iters=args.max_iters,
                        tol_residual=args.tol_residual, tol_step=args.tol_step)


def _config_dict(cfg):
    return {"lambda": cfg.lam, "gamma": cfg.gam, "rho": cfg.rho, "alpha": cfg.alpha,
            "harmonic_scale": cfg.harmonic_scale, "max_iters": cfg.max_iters,
            "tol_residual": cfg.tol_residual, "tol_step": cfg.tol_step}


def _source(args):
    if args.instance:
        return {"instance": args.instance}
    return {"generated": {"seed": args.seed}}


def cmd_generate(args):
    inst = load_or_generate(args)
    _write(args.out, inst.dumps())
    return EXIT_OK


def cmd_certify(args):
    inst = load_or_generate(args)
    cfg = make_config(args, inst)
    cert = certificate(inst, cfg)
    doc = {"source": _source(args), "config": _config_dict(cfg),
           "certificate": cert.to_dict()}
    _write(args.out, dump_json(doc))
    return EXIT_OK


def cmd_solve(args):
    inst = load_or_generate(args)
    cfg = make_config(args, inst)
    t0 = time.perf_counter()
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        trace = solve_sspvip(inst, cfg)
    wall = time.perf_counter() - t0
    for w in caught:
        if issubclass(w.category, InfeasibleCertificateWarning):
            print(f"warning: {w.message}", file=sys.stderr)
    out = args.out or "sspvip-run"
    os.makedirs(out, exist_ok=True)
    summary = {
        "source": _source(args),
        "config": _config_dict(cfg),
        "certificate": trace.certificate.to_dict(),
        "status": trace.status,
        "message": trace.message,
        "iterations": trace.iterations,
        "final_residuals": trace.residuals[-1],
        "final_residual": trace.final_residual,
        "final_err_star": None if trace.err_star is None else trace.err_star[-1],
    }
    if args.record_time:
        summary["wall_time_s"] = wall
    _write(os.path.join(out, "trace.csv"), format_trace(trace))
    _write(os.path.join(out, "summary.json"), dump_json(summary))
    print(f"{trace.status}: {trace.iterations} iterations, "
          f"final residual {trace.final_residual:.3e}", file=sys.stderr)
    if trace.diverged:
        return EXIT_DIVERGED
    if not trace.converged:
        print("warning: stopped at max_iters without meeting the tolerances",
              file=sys.stderr)
    return EXIT_OK


def cmd_verify(args):
    inst = load_or_generate(args)
    rng = np.random.default_rng(args.seed)
    checks = run_instance_suite(inst, rng)
    doc = {"source": _source(args), "seed": args.seed,
           "passed": all(c.passed for c in checks),
           "checks": [c.to_dict() for c in checks]}
    _write(args.out, dump_json(doc))
    return EXIT_OK if doc["passed"] else EXIT_VERIFY


COMMANDS = {"generate": cmd_generate, "certify": cmd_certify,
            "solve": cmd_solve, "verify": cmd_verify}


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except (UsageError, StructuralError, ValueError) as exc:
        print(f"sspvip: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
