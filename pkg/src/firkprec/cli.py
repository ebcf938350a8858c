"""Command line interface: ``firkprec {tableau,plan,solve,sweep,converge}``."""
from __future__ import annotations

import argparse
import json
import logging
import sys

import numpy as np
import yaml

from . import harness as hx
from .factory import build_plan
from .tableau import gauss_legendre, verify_order_conditions

STEP_FIELDS = ("step", "iterations", "residual", "converged", "error", "seconds")

# flag name -> (config key, type)
_OVERRIDES = {
    "n": ("n", int), "order": ("order", int), "m_path": ("m_path", str), "k_path": ("k_path", str),
    "mu": ("mu", float), "stages": ("stages", int), "dt": ("dt", float), "steps": ("steps", int),
    "t0": ("t0", float), "precond": ("precond", str), "backend": ("backend", str),
    "restart": ("restart", int), "max_iters": ("max_iters", int), "rtol": ("rtol", float),
    "warm_start": ("warm_start", str), "seed": ("seed", int),
}


def _floats(text):
    return [float(eval_fraction(x)) for x in text.split(",") if x.strip()]


def eval_fraction(text):
    """``"1/16"`` -> 0.0625; plain numbers pass through."""
    text = text.strip()
    if "/" in text:
        num, den = text.split("/")
        return float(num) / float(den)
    return float(text)


def load_config(path):
    """Read a YAML (or JSON) mapping of ExperimentConfig fields."""
    if path is None:
        return {}
    with open(path) as fh:
        data = yaml.safe_load(fh) or {}
    if not isinstance(data, dict):
        raise ValueError(f"{path}: config must be a mapping")
    return data


def config_from_args(args):
    data = load_config(getattr(args, "config", None))
    for flag, (key, typ) in _OVERRIDES.items():
        val = getattr(args, flag, None)
        if val is not None:
            data[key] = eval_fraction(val) if typ is float else typ(val)
    if getattr(args, "v", None) is not None:
        data["v"] = _floats(args.v)
    for key in ("dt", "mu", "rtol", "t0"):
        if isinstance(data.get(key), str):
            data[key] = eval_fraction(data[key])
    return hx.ExperimentConfig.from_dict(data)


def _add_run_flags(p):
    p.add_argument("--config", help="YAML/JSON file with experiment settings")
    p.add_argument("--n", help="interior nodes per axis")
    p.add_argument("--order", help="FDM accuracy order (2, 4, 6)")
    p.add_argument("--m-path", dest="m_path", help="Matrix Market mass matrix")
    p.add_argument("--k-path", dest="k_path", help="Matrix Market stiffness matrix")
    p.add_argument("--mu")
    p.add_argument("--v", help="velocity, comma separated")
    p.add_argument("--stages")
    p.add_argument("--dt", help="time step (fractions like 1/16 allowed)")
    p.add_argument("--steps")
    p.add_argument("--t0")
    p.add_argument("--precond")
    p.add_argument("--backend", choices=("ILU0", "SparseLU"))
    p.add_argument("--restart")
    p.add_argument("--max-iters", dest="max_iters")
    p.add_argument("--rtol")
    p.add_argument("--warm-start", dest="warm_start", choices=hx.WARM_STARTS)
    p.add_argument("--seed")
    p.add_argument("--out", help="CSV output path (stdout if omitted)")
    p.add_argument("--manifest", help="write a JSON run manifest here")


def _emit(text, path):
    if path:
        with open(path, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def cmd_tableau(args):
    tab = gauss_legendre(args.stages)
    rep = verify_order_conditions(tab)
    if args.format == "csv":
        lines = ["kind,i,j,value"]
        lines += [f"c,{i},,{float(tab.c[i])!r}" for i in range(tab.s)]
        lines += [f"b,{i},,{float(tab.b[i])!r}" for i in range(tab.s)]
        lines += [f"a,{i},{j},{float(tab.a[i, j])!r}" for i in range(tab.s) for j in range(tab.s)]
        lines += [f"{name},,,{float(v)!r}" for name, v, _ in rep.rows()]
        print("\n".join(lines))
        return 0
    with np.printoptions(precision=16, linewidth=160):
        print(f"Gauss-Legendre, s = {tab.s}")
        print("c =", tab.c)
        print("b =", tab.b)
        print("A =")
        print(tab.a)
    print("order conditions (max violation):")
    for name, v, ok in rep.rows():
        print(f"  {name:6s} {v:.3e} {'ok' if ok else 'FAIL'}")
    return 0 if rep.passed else 1


def _plan_payload(plan):
    def enc(a):
        a = np.asarray(a)
        if np.iscomplexobj(a):
            return {"re": a.real.tolist(), "im": a.imag.tolist()}
        return a.tolist()

    out = {"name": plan.name, "stages": plan.s, "structure": plan.structure,
           "block_sizes": list(plan.block_sizes), "core": enc(plan.core)}
    if plan.transform is not None:
        out["transform"] = enc(plan.transform)
    if plan.structure == "kron":
        out.update(kron_scale=plan.kron_scale, kron_mass=plan.kron_mass, kron_stiff=plan.kron_stiff)
    for key, val in plan.details.items():
        if isinstance(val, (float, int)):
            out[key] = val
        elif isinstance(val, np.ndarray):
            out[key] = enc(val)
    return out


def cmd_plan(args):
    if args.scheme.lower() != "gl":
        raise SystemExit("only the Gauss-Legendre scheme ('gl') is available")
    name = args.precond + ("-R" if args.reverse_order and not args.precond.upper().endswith("-R") else "")
    plan = build_plan(name, gauss_legendre(args.stages))
    if args.format == "json":
        _emit(json.dumps(_plan_payload(plan), indent=2) + "\n", args.out)
        return 0
    lines = ["matrix,i,j,re,im"]
    mats = {"core": plan.core}
    if plan.transform is not None:
        mats["transform"] = plan.transform
    for label, mat in mats.items():
        for (i, j), val in np.ndenumerate(np.asarray(mat)):
            lines.append(f"{label},{i},{j},{float(np.real(val))!r},{float(np.imag(val))!r}")
    _emit("\n".join(lines) + "\n", args.out)
    return 0


def _manifest(args, cfg_dict, outputs):
    if args.manifest:
        hx.write_manifest(args.manifest, cfg_dict, outputs)


def cmd_solve(args):
    cfg = config_from_args(args)
    res = hx.run(cfg)
    rows = [dict(r.__dict__) for r in res.records]
    text = hx.rows_to_csv(rows, STEP_FIELDS)
    _emit(text, args.out)
    logging.info("avg iterations (steps 2+): %.2f, factorizations %s", res.avg_iterations, res.factorizations)
    _manifest(args, cfg.to_dict(), {"steps": (args.out or "-", text)})
    return 0 if res.all_converged else 2


def cmd_sweep(args):
    cfg = config_from_args(args)
    names = [x.strip() for x in (args.preconds or cfg.precond).split(",") if x.strip()]
    dts = _floats(args.dts) if args.dts else [cfg.dt]
    ns = [int(x) for x in args.ns.split(",")] if args.ns else [cfg.n]
    rows, timings = hx.run_iteration_sweep(cfg, names, dts, ns, workers=args.workers)
    text = hx.rows_to_csv(rows, hx.SWEEP_FIELDS)
    _emit(text, args.out)
    outputs = {"sweep": (args.out or "-", text)}
    if args.out:
        tpath = args.out + ".timings.csv"
        outputs["timings"] = (tpath, hx.write_csv(tpath, timings, hx.TIMING_FIELDS))
    sweep_cfg = dict(cfg.to_dict(), preconds=names, dts=dts, ns=ns)
    _manifest(args, sweep_cfg, outputs)
    return 0


def cmd_converge(args):
    cfg = config_from_args(args)
    ladder = []
    for item in args.ladder.split(","):
        n, dt = item.split(":")
        ladder.append((int(n), eval_fraction(dt)))
    rows = hx.run_convergence_study(cfg, ladder, eval_fraction(args.final_time))
    text = hx.rows_to_csv(rows, hx.CONVERGENCE_FIELDS)
    _emit(text, args.out)
    _manifest(args, dict(cfg.to_dict(), ladder=ladder, final_time=args.final_time),
              {"convergence": (args.out or "-", text)})
    return 0


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--verbose", action="store_true", help="log progress to stderr")
    ap = argparse.ArgumentParser(prog="firkprec", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("tableau", parents=[common], help="print a Gauss-Legendre tableau and its order conditions")
    p.add_argument("--stages", type=int, required=True)
    p.add_argument("--format", choices=("text", "csv"), default="text")
    p.set_defaults(func=cmd_tableau)

    p = sub.add_parser("plan", parents=[common], help="dump the small matrices of a preconditioner plan")
    p.add_argument("--scheme", default="gl")
    p.add_argument("--stages", type=int, required=True)
    p.add_argument("--precond", required=True)
    p.add_argument("--reverse-order", action="store_true")
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.add_argument("--out")
    p.set_defaults(func=cmd_plan)

    p = sub.add_parser("solve", parents=[common], help="time-step one configuration, one CSV row per step")
    _add_run_flags(p)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("sweep", parents=[common], help="average iterations over preconditioners x dt x n")
    _add_run_flags(p)
    p.add_argument("--preconds", help="comma separated names (e.g. BRSD,BGS,SABRSD-R)")
    p.add_argument("--dts", help="comma separated time steps")
    p.add_argument("--ns", help="comma separated grid sizes")
    p.add_argument("--workers", type=int, default=1, help="run cells in this many processes")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("converge", parents=[common], help="error/order table along an (n, dt) ladder")
    _add_run_flags(p)
    p.add_argument("--ladder", required=True, help="n:dt pairs, e.g. 7:1/8,15:1/16,31:1/32")
    p.add_argument("--final-time", dest="final_time", required=True)
    p.set_defaults(func=cmd_converge)
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
