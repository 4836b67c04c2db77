"""Command-line interface: map-spec files in, JSON reports and CSV tables out.

Every subcommand prints one JSON report to stdout; file artifacts (orbit
databases, fields, leaf tables, paths) go to the --out directory.  All
randomness is seeded from --seed or the ANOSOV_SEED environment variable,
and floats are formatted at 17 significant digits, so identical inputs
give byte-identical reports.  Exit codes: 0 definite verdict or plain
report, 2 Inconclusive verdict, 1 any error.
"""

import argparse
import json
import os
import sys

import numpy as np

from . import accessibility, classify, cocycle, conjugacy, regularity
from .errors import AnosovLabError, SearchExhausted, SpecialMap
from .hyperbolic import canonical_chain, periodic_exponents
from .maps import load_spec, save_spec
from .orbits import OrbitDatabase

INCONCLUSIVE_EXIT = 2


# ---------------------------------------------------------------------------
# deterministic JSON at 17 significant digits

def _format_json(obj, indent=0):
    pad = "  " * indent
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = ",\n".join(
            f'{pad}  {json.dumps(str(k))}: {_format_json(v, indent + 1)}'
            for k, v in obj.items())
        return "{\n" + items + "\n" + pad + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        items = ",\n".join(f"{pad}  {_format_json(v, indent + 1)}" for v in obj)
        return "[\n" + items + "\n" + pad + "]"
    if isinstance(obj, bool) or obj is None:
        return json.dumps(obj)
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        if v != v or v in (float("inf"), float("-inf")):
            return json.dumps(str(v))
        return format(v, ".17g")
    if isinstance(obj, np.ndarray):
        return _format_json(obj.tolist(), indent)
    return json.dumps(str(obj))


def emit(report, out=None, name="report.json"):
    text = _format_json(report)
    print(text)
    if out:
        os.makedirs(out, exist_ok=True)
        with open(os.path.join(out, name), "w", encoding="utf-8") as fh:
            fh.write(text + "\n")


def _parse_point(s):
    parts = s.split(",")
    if len(parts) != 2:
        raise argparse.ArgumentTypeError("expected 'x1,x2'")
    return np.array([float(parts[0]), float(parts[1])])


# ---------------------------------------------------------------------------
# subcommand handlers (each returns an exit code)

def cmd_verify(args):
    spec = load_spec(args.spec)
    cert = classify.certify_escalating(spec)
    emit({
        "map": spec.name,
        "linear": spec.model.a.tolist(),
        "lambda_s": spec.model.lam_s,
        "lambda_u": spec.model.lam_u,
        "degree": abs(spec.model.det),
        "certificate": {
            "steps": cert.steps,
            "expansion_lb": cert.expansion_lb,
            "contraction_ub": cert.contraction_ub,
            "grid_step": cert.grid_step,
            "lipschitz_slack": cert.lipschitz_slack,
            "cone_aperture": cert.cone_aperture_u,
        },
    }, args.out, "verify.json")
    return 0


def cmd_periodic(args):
    spec = load_spec(args.spec)
    db = OrbitDatabase(spec)
    for n in range(1, args.max_period + 1):
        db.ensure(n)
    orbits = db.orbits_up_to(args.max_period)
    counts = {}
    for o in orbits:
        counts[o.period] = counts.get(o.period, 0) + 1
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        db.save(args.out)
    emit({
        "map": spec.name,
        "max_period": args.max_period,
        "orbit_counts": {str(k): v for k, v in sorted(counts.items())},
        "orbits": [o.record() for o in orbits],
    }, args.out, "periodic.json")
    return 0


def cmd_exponents(args):
    spec = load_spec(args.spec)
    db = OrbitDatabase(spec)
    for n in range(1, args.max_period + 1):
        db.ensure(n)
    rows = []
    for o in db.orbits_up_to(args.max_period):
        lam_s, lam_u = periodic_exponents(spec, np.array(o.point), o.period)
        rows.append({"period": o.period, "point": list(o.point),
                     "lambda_s": lam_s, "lambda_u": lam_u,
                     "log_jac": o.log_jac})
    emit({"map": spec.name, "max_period": args.max_period, "orbits": rows},
         args.out, "exponents.json")
    return 0


def cmd_conjugacy(args):
    spec = load_spec(args.spec)
    field = conjugacy.conjugacy_to_linear(spec)
    residual = field.residual_sup()
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        field.export_csv(os.path.join(args.out, "conjugacy_field.csv"))
    emit({
        "map": spec.name,
        "depth": field.depth,
        "displacement_bound": field.bound,
        "tail_u": field.tail_u,
        "tail_s": field.tail_s,
        "residual_sup": residual,
    }, args.out, "conjugacy.json")
    return 0


def cmd_special(args):
    spec = load_spec(args.spec)
    field = conjugacy.conjugacy_to_linear(spec)
    rng = np.random.default_rng(args.seed)
    rep = conjugacy.specialness_defect(spec, field, rng=rng)
    emit({
        "map": spec.name,
        "defect": rep.defect,
        "noise_floor": rep.noise_floor,
        "verdict": rep.verdict,
        "samples": rep.samples,
    }, args.out, "special.json")
    return INCONCLUSIVE_EXIT if rep.verdict == "Inconclusive" else 0


def cmd_access(args):
    spec = load_spec(args.spec)
    rng = np.random.default_rng(args.seed)
    rep = accessibility.dichotomy_verdict(spec, rng=rng)
    report = {"map": spec.name, **rep.record()}
    code = INCONCLUSIVE_EXIT if rep.verdict == "Inconclusive" else 0
    if args.src is not None and args.dst is not None:
        try:
            path = accessibility.find_u_path(
                spec, args.src, args.dst, verdict=rep,
                rng=np.random.default_rng(args.seed))
            report["u_path"] = path.summary()
            if args.out:
                os.makedirs(args.out, exist_ok=True)
                path.write_csv(os.path.join(args.out, "u_path.csv"))
                path.write_json(os.path.join(args.out, "u_path.json"))
        except (SpecialMap, SearchExhausted) as exc:
            report["u_path_error"] = f"{type(exc).__name__}: {exc}"
    emit(report, args.out, "access.json")
    return code


def cmd_livschitz(args):
    f = load_spec(args.spec_f)
    g = load_spec(args.spec_g)
    h = conjugacy.conjugacy_between(f, g)
    db_f, db_g = OrbitDatabase(f), OrbitDatabase(g)
    for n in range(1, args.max_period + 1):
        db_f.ensure(n)
        db_g.ensure(n)
    w = cocycle.log_stable_cocycle()
    pairs = []
    for orb in db_f.orbits_up_to(args.max_period):
        q, _ = conjugacy.match_periodic(f, g, h, orb, db_g)
        pairs.append((np.array(orb.point), q))
    obstruction = cocycle.periodic_obstruction(f, g, pairs, w, w)
    report = {
        "f": f.name, "g": g.name,
        "max_period": args.max_period,
        "matched_orbits": len(pairs),
        "obstruction": obstruction,
        "tol": args.tol,
        "verdict": "Cohomologous" if obstruction < args.tol else "Obstructed",
    }
    if obstruction < args.tol:
        tf = cocycle.transfer_P(f, g, h, samples=args.samples,
                                obstruction=obstruction, tol=args.tol)
        report["transfer_P"] = {
            "samples": len(tf.points) + len(tf.held_points),
            "fill_radius": tf.fill_radius,
            "drift": tf.drift,
            "max_abs_U": tf.meta["max_abs_U"],
            "ratio_check": tf.meta.get("ratio_check"),
        }
        if args.out:
            os.makedirs(args.out, exist_ok=True)
            tf.write_csv(os.path.join(args.out, "transfer_P.csv"))
    emit(report, args.out, "livschitz.json")
    return 0


def cmd_rho(args):
    spec = load_spec(args.spec)
    x = args.x
    y = cocycle._leaf_probe(spec, x, args.sep)
    rho = cocycle.density_rho(spec, x, y)
    d_s = cocycle.affine_distance(spec, x, y)
    report = {
        "map": spec.name,
        "x": x.tolist(),
        "y": y.tolist(),
        "leaf_separation": args.sep,
        "rho_xy": rho,
        "rho_yx": cocycle.density_rho(spec, y, x),
        "affine_distance": d_s,
    }
    emit(report, args.out, "rho.json")
    return 0


def _classification_exit(rep):
    return INCONCLUSIVE_EXIT if rep.verdict == "Inconclusive" else 0


def cmd_classify(args):
    rep = classify.classify_topological(
        load_spec(args.spec_f), load_spec(args.spec_g),
        max_period=args.max_period, tol=args.tol)
    emit(rep.record(), args.out, "classify.json")
    return _classification_exit(rep)


def cmd_classify_smooth(args):
    rep = classify.classify_smooth(
        load_spec(args.spec_f), load_spec(args.spec_g),
        max_period=args.max_period, tol=args.tol)
    emit(rep.record(), args.out, "classify_smooth.json")
    return _classification_exit(rep)


def cmd_regularity(args):
    f = load_spec(args.spec_f)
    g = load_spec(args.spec_g)
    h = conjugacy.conjugacy_between(f, g)
    x = args.x
    rep_s = regularity.stable_derivative_estimate(f, g, h, x)
    chain = canonical_chain(f, x, 22)
    rep_u = regularity.unstable_derivative_estimate(f, g, h, x, chain)
    emit({"f": f.name, "g": g.name,
          "stable": rep_s.record(), "unstable": rep_u.record()},
         args.out, "regularity.json")
    return 0


# ---------------------------------------------------------------------------
# config-driven pipeline

_CONFIG_KEYS = {"subcommand", "inputs", "out", "max_period", "tol", "seed",
                "src", "dst", "x", "sep", "samples"}


def run_pipeline(config_path):
    """Run one subcommand from a JSON config; returns the exit code."""
    try:
        with open(config_path, "r", encoding="utf-8") as fh:
            cfg = json.load(fh)
    except json.JSONDecodeError as exc:
        print(f"config error: invalid JSON at line {exc.lineno}: {exc.msg}",
              file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    if not isinstance(cfg, dict):
        print("config error: top level must be a JSON object", file=sys.stderr)
        return 1
    unknown = set(cfg) - _CONFIG_KEYS
    if unknown:
        print(f"config error: unknown key(s) {sorted(unknown)}", file=sys.stderr)
        return 1
    if "subcommand" not in cfg:
        print("config error: missing required key 'subcommand'", file=sys.stderr)
        return 1
    argv = [str(cfg["subcommand"])] + [str(p) for p in cfg.get("inputs", [])]
    for key in ("out", "max_period", "tol", "seed", "src", "dst", "x",
                "sep", "samples"):
        if key in cfg:
            argv += [f"--{key.replace('_', '-')}", str(cfg[key])]
    return main(argv)


def cmd_pipeline(args):
    return run_pipeline(args.config)


# ---------------------------------------------------------------------------

def build_parser():
    p = argparse.ArgumentParser(
        prog="anosov",
        description="numerical laboratory for non-invertible hyperbolic "
                    "toral maps")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--out", default=None, help="artifact directory")
        sp.add_argument("--seed", type=int,
                        default=int(os.environ.get("ANOSOV_SEED", "0")))
        sp.add_argument("--tol", type=float, default=1e-6)
        sp.add_argument("--max-period", type=int, default=4, dest="max_period")

    def one_spec(name, fn, help_):
        sp = sub.add_parser(name, help=help_)
        sp.add_argument("spec")
        common(sp)
        sp.set_defaults(fn=fn)
        return sp

    def two_specs(name, fn, help_):
        sp = sub.add_parser(name, help=help_)
        sp.add_argument("spec_f")
        sp.add_argument("spec_g")
        common(sp)
        sp.set_defaults(fn=fn)
        return sp

    one_spec("verify", cmd_verify, "certify uniform hyperbolicity")
    one_spec("periodic", cmd_periodic, "enumerate periodic orbits")
    one_spec("exponents", cmd_exponents, "periodic stable/unstable exponents")
    one_spec("conjugacy", cmd_conjugacy, "bounded conjugacy to the linear model")
    one_spec("special", cmd_special, "specialness defect of the conjugacy")
    sp = one_spec("access", cmd_access, "special/u-accessible dichotomy and u-paths")
    sp.add_argument("--src", type=_parse_point, default=None)
    sp.add_argument("--dst", type=_parse_point, default=None)
    sp = two_specs("livschitz", cmd_livschitz,
                   "periodic obstructions and the transfer function P")
    sp.add_argument("--samples", type=int, default=400)
    sp = one_spec("rho", cmd_rho, "stable density and affine distance")
    sp.add_argument("--x", type=_parse_point, default=np.array([0.31, 0.62]))
    sp.add_argument("--sep", type=float, default=0.02)
    two_specs("classify", cmd_classify, "topological classification")
    two_specs("classify-smooth", cmd_classify_smooth, "smooth classification")
    sp = two_specs("regularity", cmd_regularity,
                   "leafwise regularity of the conjugacy")
    sp.add_argument("--x", type=_parse_point, default=np.array([0.27, 0.64]))
    sp = sub.add_parser("pipeline", help="run a subcommand from a JSON config")
    sp.add_argument("config")
    sp.set_defaults(fn=cmd_pipeline)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except AnosovLabError as exc:
        print(_format_json({"error": type(exc).__name__, "message": str(exc)}),
              file=sys.stderr)
        return 1


def entry():
    sys.exit(main())


if __name__ == "__main__":
    sys.exit(main())
