"""Acceptance suite: eleven end-to-end criteria with exact combinatorial
anchors and stated tolerances.  Each test prints one PASS/FAIL line on the
live terminal (bypassing capture) and then asserts.
"""

import math

import numpy as np
import pytest

import anosovlab as al
from anosovlab.accessibility import find_fan_point, find_u_path
from anosovlab.cocycle import (affine_distance, custom_cocycle, density_rho,
                               leaf_companion, log_stable_cocycle,
                               periodic_obstruction, solve_coboundary)
from anosovlab.errors import SearchExhausted
from anosovlab.hyperbolic import (angular_gap, log_stable_norm,
                                  orbit_log_jacobian, periodic_exponents,
                                  stable_directions)
from anosovlab.orbits import matrix_power_int
from anosovlab.torus import project, torus_distance


def _criterion(capsys, num, desc, ok, detail=""):
    line = f"ACCEPTANCE {num:2d} [{'PASS' if ok else 'FAIL'}] {desc}"
    if detail:
        line += f"  ({detail})"
    with capsys.disabled():
        print(line, flush=True)
    assert ok, line


COMPANION_DEPTH = 25


def _companion(spec, x, sep):
    scale = abs(spec.model.lam_s) ** COMPANION_DEPTH
    return leaf_companion(spec, x, sep * scale, depth=COMPANION_DEPTH)


def _det_count(spec, n):
    an = matrix_power_int(spec.model.a, n) - np.eye(2, dtype=np.int64)
    return abs(int(round(np.linalg.det(an.astype(float)))))


# ---------------------------------------------------------------------------

def test_criterion_01_linear_oracle(capsys, linear, field_linear, db_linear):
    n = 64
    g = (np.arange(n) + 0.5) / n
    xx, yy = np.meshgrid(g, g, indexing="ij")
    pts = np.stack([xx.ravel(), yy.ravel()], axis=-1)
    h_sup = float(np.max(np.abs(field_linear.h(pts))))

    rng = np.random.default_rng(41)
    rho_err = dist_err = 0.0
    for _ in range(5):
        x = project(rng.random(2))
        y = _companion(linear, x, 1e-3 * (0.5 + rng.random()))
        rho_err = max(rho_err, abs(density_rho(linear, x, y) - 1.0))
        d = affine_distance(linear, x, y)
        dist_err = max(dist_err, abs(d - torus_distance(x, y)) / d)

    lam_ref = math.log(2.0 - math.sqrt(2.0))
    lam_err = max(abs(o.lambda_s - lam_ref) for o in db_linear.orbits_up_to(5))

    spread = max(al.u_direction_spread(linear, p,
                                       rng=np.random.default_rng(k))
                 for k, p in enumerate(rng.random((3, 2))))
    verdict = al.dichotomy_verdict(linear).verdict

    ok = (h_sup < 1e-12 and rho_err < 1e-12 and dist_err < 1e-10
          and lam_err < 1e-10 and spread < 1e-12 and verdict == "Special")
    _criterion(capsys, 1, "linear oracle: zero field, unit density, "
               "affine=arclength, exact exponents, Special", ok,
               f"sup|h|={h_sup:.1e} |rho-1|={rho_err:.1e} "
               f"d_err={dist_err:.1e} lam_err={lam_err:.1e} "
               f"spread={spread:.1e} verdict={verdict}")


def test_criterion_02_periodic_counts(capsys, linear, gen1, db_linear, db_gen1):
    # oracle counts recomputed from |det(A^n - I)|: 1, 7, 31, 119, 431, 1519
    ok = True
    details = []
    for spec, db in ((linear, db_linear), (gen1, db_gen1)):
        db.ensure(6)
        for n in range(1, 7):
            want = _det_count(spec, n)
            got = len(db.points_of_period_dividing(n))
            ok = ok and (got == want)
            if n == 6:
                details.append(f"{spec.name}: n=6 {got}/{want}")
    _criterion(capsys, 2, "periodic point counts equal |det(A^n - I)| "
               "for n=1..6 on linear and perturbed specs", ok,
               "; ".join(details))


def test_criterion_03_constructed_conjugacy(capsys, gen1, g_conj, phi, h_conj):
    n = 64
    g = (np.arange(n) + 0.5) / n
    xx, yy = np.meshgrid(g, g, indexing="ij")
    pts = np.stack([xx.ravel(), yy.ravel()], axis=-1)
    h_err = float(np.max(np.abs(h_conj(pts) - phi(pts))))

    rep = al.classify_smooth(gen1, g_conj, max_period=5, tol=1e-8)
    topo_max = max(r.d_lambda_s for r in rep.rows)
    smooth_max = rep.max_discrepancy

    w = log_stable_cocycle()
    matching = [(np.array(r.p), np.array(r.q), r.period) for r in rep.rows]
    obstruction = periodic_obstruction(gen1, g_conj, matching, w, w)

    ok = (h_err < 1e-8 and rep.verdict == "ConjugateConsistent"
          and topo_max < 1e-8 and smooth_max < 1e-8 and obstruction < 1e-8)
    _criterion(capsys, 3, "constructed conjugate pair: H matches the "
               "diffeomorphism, periods<=5 consistent, zero obstruction", ok,
               f"|H-Phi|={h_err:.1e} dlam={topo_max:.1e} "
               f"djac={smooth_max:.1e} obstr={obstruction:.1e}")


def test_criterion_04_negative_control(capsys, gen1, detuned):
    rep = al.classify_topological(gen1, detuned, max_period=3, tol=1e-6)
    fixed = [r for r in rep.rows if r.period == 1]
    ok = (rep.verdict == "NotConjugate" and len(fixed) == 1
          and fixed[0].d_lambda_s > 1e-5)
    _criterion(capsys, 4, "detuned pair rejected, fixed-point row carries "
               "the discrepancy", ok,
               f"verdict={rep.verdict} fixed-point dlam="
               f"{fixed[0].d_lambda_s:.2e}" if fixed else "no fixed-point row")


def test_criterion_05_affine_identities(capsys, gen1):
    # 200 random configurations split over the four identity families
    rng = np.random.default_rng(5150)
    worst = dict(cocycle=0.0, push=0.0, transform=0.0, reversal=0.0,
                 additivity=0.0)

    def seps():
        return 1e-6 * (0.5 + rng.random()), -1e-6 * (0.5 + rng.random())

    for _ in range(60):           # rho cocycle identity
        x = project(rng.random(2))
        s1, s2 = seps()
        y, z = _companion(gen1, x, s1), _companion(gen1, x, s2)
        lhs = density_rho(gen1, x, y) * density_rho(gen1, y, z)
        worst["cocycle"] = max(worst["cocycle"],
                               abs(lhs - density_rho(gen1, x, z)))

    for _ in range(60):           # push rule rho(fx,fy) = (w_y/w_x) rho(x,y)
        x = project(rng.random(2))
        y = _companion(gen1, x, seps()[0])
        fx, fy = gen1.eval_torus(x), gen1.eval_torus(project(y))
        wx = np.exp(log_stable_norm(gen1, x))
        wy = np.exp(log_stable_norm(gen1, project(y)))
        worst["push"] = max(worst["push"],
                            abs(density_rho(gen1, fx, fy)
                                - (wy / wx) * density_rho(gen1, x, y)))

    for _ in range(50):           # transformation d(fx,fy) = w_x d(x,y)
        x = project(rng.random(2))
        s1 = seps()[0]
        y = _companion(gen1, x, s1)
        fx, fy = gen1.eval_torus(x), gen1.eval_torus(project(y))
        wx = np.exp(log_stable_norm(gen1, x))
        lhs = affine_distance(gen1, fx, fy, step=s1 / 4)
        rhs = wx * affine_distance(gen1, x, y, step=s1 / 4)
        worst["transform"] = max(worst["transform"], abs(lhs - rhs) / abs(lhs))

    for _ in range(30):           # reversal and weighted additivity
        x = project(rng.random(2))
        s1, s2 = seps()
        y, z = _companion(gen1, x, s1), _companion(gen1, x, s2)
        rho_xy = density_rho(gen1, x, y)
        rho_xz = density_rho(gen1, x, z)
        d_xy = affine_distance(gen1, x, y, step=s1 / 4)
        d_yx = affine_distance(gen1, y, x, step=s1 / 4)
        worst["reversal"] = max(worst["reversal"],
                                abs(d_yx - rho_xy * d_xy))
        d_zy = affine_distance(gen1, z, y, step=s1 / 4)
        d_zx = affine_distance(gen1, z, x, step=s1 / 4)
        worst["additivity"] = max(worst["additivity"],
                                  abs(d_zy - (d_zx + rho_xz * d_xy)))

    ok = (worst["cocycle"] < 1e-10 and worst["push"] < 1e-9
          and worst["transform"] < 1e-8 and worst["reversal"] < 1e-9
          and worst["additivity"] < 1e-9)
    _criterion(capsys, 5, "affine-structure identities on 200 random "
               "configurations", ok,
               " ".join(f"{k}={v:.1e}" for k, v in worst.items()))


def test_criterion_06_conjugacy_residual_bound(capsys, gen1):
    K = 40
    fld = al.conjugacy_to_linear(gen1, depth=K, grid_m=128)
    residual = fld.residual_sup(grid_n=64)
    m = gen1.model
    bound = gen1.perturbation_sup() * (
        abs(m.lam_u) ** (-K) / (abs(m.lam_u) - 1.0)
        + abs(m.lam_s) ** K / (1.0 - abs(m.lam_s)))
    ok = residual < bound
    _criterion(capsys, 6, "conjugacy-equation residual below the analytic "
               "truncation tail at depth 40", ok,
               f"residual={residual:.2e} bound={bound:.2e}")


def test_criterion_07_livschitz_oracle(capsys, gen1):
    def v(pts):
        return 0.1 * np.cos(2.0 * np.pi * np.asarray(pts, dtype=float)[..., 0])

    def psi_fn(spec, x, chain=None):
        x2 = np.atleast_2d(np.asarray(x, dtype=float))
        out = v(spec.eval_torus(project(x2))) - v(x2)
        return out if np.asarray(x).ndim > 1 else float(out[0])

    psi = custom_cocycle(psi_fn, vectorized=True)
    tf = solve_coboundary(gen1, psi, seed=(0.123, 0.456), orbit_len=100000)
    err = tf.compare_with(v)
    ok = err < 1e-5 and tf.residual < 1e-5
    _criterion(capsys, 7, "coboundary solver recovers the generating "
               "potential on a length-1e5 orbit", ok,
               f"held-out error={err:.2e} residual={tf.residual:.2e}")


def test_criterion_08_dichotomy_coherence(capsys):
    from importlib import resources
    names = ["a3_linear", "a3_special", "a3_gen1", "a3_gen2", "a3_gen3",
             "a3_gen4", "a3_detuned"]
    expected_special = {"a3_linear", "a3_special"}
    ok = True
    details = []
    for name in names:
        spec = al.load_spec(
            str(resources.files("anosovlab").joinpath(f"fleet/{name}.json")))
        rep = al.dichotomy_verdict(spec)
        agree = rep.defect_verdict == rep.spread_verdict == rep.verdict
        want = "Special" if name in expected_special else "UAccessible"
        ok = ok and agree and rep.verdict == want
        details.append(f"{name}:{rep.verdict}")
    _criterion(capsys, 8, "defect and spread detectors agree on the whole "
               "fleet with no Inconclusive", ok, " ".join(details))


def test_criterion_09_direction_convergence(capsys, gen1):
    rng = np.random.default_rng(99)
    pts = rng.random((100, 2))
    depths = [10, 15, 20, 25, 30]
    dirs = {N: stable_directions(gen1, pts, N) for N in depths}
    gaps = [max(angular_gap(dirs[N][k], dirs[N + 5][k]) for k in range(100))
            for N in depths[:-1]]
    factor = (abs(gen1.model.lam_s) / abs(gen1.model.lam_u)) ** 5 * 1.5
    ok = True
    ratios = []
    for a, b in zip(gaps, gaps[1:]):
        if b < 1e-13:            # below round-off: decay confirmed outright
            ratios.append("floor")
            continue
        ratios.append(f"{b / a:.1e}")
        ok = ok and (b <= a * factor)
    _criterion(capsys, 9, "stable direction field converges at the "
               "contraction-ratio rate in the truncation depth", ok,
               f"gaps={['%.1e' % g for g in gaps]} ratios={ratios} "
               f"bound={factor:.1e}")


def test_criterion_10_exponent_jacobian_identity(capsys, gen1, db_gen1):
    worst = 0.0
    for orb in db_gen1.orbits_up_to(5):
        p = np.array(orb.point)
        lam_s, lam_u = periodic_exponents(gen1, p, orb.period)
        lhs = orb.period * (lam_s + lam_u)
        worst = max(worst, abs(lhs - orbit_log_jacobian(gen1, p, orb.period)))
    ok = worst < 1e-9
    _criterion(capsys, 10, "n(lambda_s + lambda_u) equals log|Jac f^n| on "
               "every orbit up to period 5", ok, f"max dev={worst:.2e}")


def test_criterion_11_u_paths(capsys, gen1):
    rng = np.random.default_rng(111)
    fan = find_fan_point(gen1)
    exhausted = 0
    worst_gap = 0.0
    max_segs = 0
    for _ in range(20):
        src, dst = rng.random(2), rng.random(2)
        try:
            path = find_u_path(gen1, src, dst, verdict="UAccessible", fan=fan,
                               rng=np.random.default_rng(5))
        except SearchExhausted:
            exhausted += 1
            continue
        max_segs = max(max_segs, len(path.segments))
        worst_gap = max(worst_gap, path.max_gap)
    ok = exhausted <= 2 and max_segs <= 4 and worst_gap < 1e-6
    _criterion(capsys, 11, "20 random endpoint pairs joined by u-paths of "
               "at most 4 segments", ok,
               f"exhausted={exhausted}/20 max_segments={max_segs} "
               f"worst_gap={worst_gap:.1e}")
