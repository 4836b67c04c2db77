"""Periodic point enumeration via lattice classes and Newton.

Each period-n point of f corresponds to exactly one coset of
Z^2 / (A^n - I) Z^2: the lift equation F^n(x) = x + m has one solution
per class m, so the count |det(A^n - I)| is exact and checked.
"""

import json
import math
import os
from dataclasses import dataclass

import numpy as np

from .errors import BudgetExceeded, NewtonDivergence
from .hyperbolic import orbit_log_jacobian, orbit_points, periodic_exponents
from .torus import coset_reps, project, torus_delta, torus_distance


@dataclass(frozen=True)
class PeriodicOrbit:
    point: tuple          # canonical representative (lexicographically least)
    period: int           # minimal period
    lattice_class: tuple  # m with F^period(p_hat) = p_hat + m
    lambda_s: float
    lambda_u: float
    log_jac: float        # log |Jac f^period| summed along the orbit

    def record(self):
        return {
            "period": self.period,
            "class": list(self.lattice_class),
            "point": [self.point[0], self.point[1]],
            "lambda_s": self.lambda_s,
            "lambda_u": self.lambda_u,
            "log_jac": self.log_jac,
        }


def matrix_power_int(a, n):
    out = np.eye(2, dtype=np.int64)
    base = a.astype(np.int64)
    for _ in range(n):
        out = out @ base
    return out


def class_count(spec, n):
    an = matrix_power_int(spec.model.a, n) - np.eye(2, dtype=np.int64)
    return abs(int(round(np.linalg.det(an.astype(float)))))


def periodic_points_of_period(spec, n, tol=1e-13, budget=200000, max_iter=80):
    """All solutions of f^n(x) = x, one per lattice class; (points, classes)."""
    an_i = matrix_power_int(spec.model.a, n) - np.eye(2, dtype=np.int64)
    count = abs(int(round(np.linalg.det(an_i.astype(float)))))
    if count > budget:
        raise BudgetExceeded(f"|det(A^{n} - I)| = {count} exceeds budget {budget}")
    reps = np.array(coset_reps(an_i), dtype=float)
    x0 = np.linalg.solve(
        np.broadcast_to(an_i.astype(float), (count, 2, 2)), reps[..., None])[..., 0]
    # phase 1: multiple shooting on the cover.  Single shooting on F^n is
    # hopeless for larger n (condition ~ lam_u^n); the cyclic system keeps
    # every block at condition ~ lam_u.
    a_f = spec.model.a.astype(float)
    xs = np.empty((count, n, 2))
    xs[:, 0] = x0
    for i in range(1, n):
        xs[:, i] = xs[:, i - 1] @ a_f.T   # exact orbit of the linear seed
    def residual(xs):
        fx = spec.eval_lift(xs)
        res = np.empty_like(xs)
        res[:, : n - 1] = fx[:, : n - 1] - xs[:, 1:]
        res[:, n - 1] = fx[:, n - 1] - xs[:, 0] - reps
        return res
    res = residual(xs)
    rnorm = np.max(np.abs(res).reshape(count, -1), axis=1)
    for it in range(max_iter):
        if np.max(rnorm) < 1e-9:
            break
        jac = np.zeros((count, 2 * n, 2 * n))
        dfs = spec.derivative(xs.reshape(-1, 2)).reshape(count, n, 2, 2)
        for i in range(n):
            jac[:, 2 * i : 2 * i + 2, 2 * i : 2 * i + 2] = dfs[:, i]
            j = (i + 1) % n
            jac[:, 2 * i : 2 * i + 2, 2 * j : 2 * j + 2] -= np.eye(2)
        step = np.linalg.solve(jac, res.reshape(count, -1, 1))[..., 0].reshape(count, n, 2)
        lam = np.ones(count)
        for _ in range(25):
            trial = xs - lam[:, None, None] * step
            rtrial = residual(trial)
            rt = np.max(np.abs(rtrial).reshape(count, -1), axis=1)
            improved = rt <= rnorm * (1.0 - 0.2 * lam) + 1e-12
            if np.all(improved):
                break
            lam = np.where(improved, lam, lam * 0.5)
        xs, res = trial, rtrial
        rnorm = rt
    else:
        bad = int(np.argmax(rnorm))
        raise NewtonDivergence(
            f"period-{n} class {tuple(reps[bad].astype(int))}: residual {rnorm[bad]:.3e}")
    x = xs[:, 0]
    # phase 2: polish with mod-1 iteration, which keeps every evaluation O(1)
    t = project(x)
    for _ in range(4):
        ft = t
        dfn = np.broadcast_to(np.eye(2), (count, 2, 2)).copy()
        for _ in range(n):
            dfn = spec.derivative(ft) @ dfn
            ft = spec.eval_torus(ft)
        res = torus_delta(ft, t)
        if np.max(np.linalg.norm(res, axis=-1)) < tol:
            break
        step = np.linalg.solve(dfn - np.eye(2), res[..., None])[..., 0]
        t = project(t - step)
    pts = t
    # duplicate-freeness: hyperbolic separation keeps distinct classes apart
    if count <= 5000:
        d = torus_distance(pts[:, None, :], pts[None, :, :])
        np.fill_diagonal(d, 1.0)
        if d.min() < 1e-6:
            raise NewtonDivergence(f"period-{n}: two classes collapsed to one point")
    return pts, reps.astype(int)


def _minimal_period(spec, p, n, tol=1e-9):
    for d in sorted(k for k in range(1, n + 1) if n % k == 0):
        if torus_distance(spec.iterate_torus(p, d), p) < tol:
            return d
    return n


def _lattice_class(spec, p, d):
    lift = spec.eval_lift(project(np.asarray(p, dtype=float)))
    x = project(np.asarray(p, dtype=float))
    z = x.copy()
    for _ in range(d):
        z = spec.eval_lift(z)
    m = np.rint(z - x).astype(int)
    return (int(m[0]), int(m[1]))


def enumerate_periodic(spec, n, tol=1e-13, budget=200000):
    """Orbits of all points with f^n(x) = x, keyed by minimal period.

    Returns a list of PeriodicOrbit with minimal period dividing n; the sum
    of their periods equals |det(A^n - I)|.
    """
    pts, _ = periodic_points_of_period(spec, n, tol=tol, budget=budget)
    used = np.zeros(len(pts), dtype=bool)
    orbits = []
    for i in range(len(pts)):
        if used[i]:
            continue
        d = _minimal_period(spec, pts[i], n)
        cycle = orbit_points(spec, pts[i], d)
        # mark all orbit points as used
        for q in cycle:
            dist = torus_distance(pts, q)
            j = int(np.argmin(dist))
            if dist[j] < 1e-6:
                used[j] = True
        canon = min((tuple(q) for q in cycle))
        lam_s, lam_u = periodic_exponents(spec, np.array(canon), d)
        orbits.append(PeriodicOrbit(
            point=(float(canon[0]), float(canon[1])),
            period=d,
            lattice_class=_lattice_class(spec, np.array(canon), d),
            lambda_s=lam_s,
            lambda_u=lam_u,
            log_jac=orbit_log_jacobian(spec, np.array(canon), d),
        ))
    return orbits


def orbit_jacobian(spec, orbit):
    """log |det Df^n(p)|; basepoint-independent along the orbit."""
    return orbit_log_jacobian(spec, np.array(orbit.point), orbit.period)


class OrbitDatabase:
    """Orbits per period, persisted as JSON-lines keyed by the spec hash."""

    def __init__(self, spec):
        self.spec = spec
        self.by_period = {}   # n -> list of PeriodicOrbit with minimal period n

    def ensure(self, n, budget=200000):
        """Compute (incrementally) all orbits of minimal period <= n."""
        for d in range(1, n + 1):
            if d in self.by_period:
                continue
            orbits = enumerate_periodic(self.spec, d, budget=budget)
            for orb in orbits:
                bucket = self.by_period.setdefault(orb.period, [])
                if not any(torus_distance(np.array(o.point), np.array(orb.point)) < 1e-8
                           for o in bucket):
                    bucket.append(orb)
        return self

    def orbits_up_to(self, n):
        out = []
        for d in sorted(self.by_period):
            if d <= n:
                out.extend(self.by_period[d])
        return out

    def points_of_period_dividing(self, n):
        """All periodic points (not orbit representatives) with f^n(p) = p."""
        pts = []
        for d, orbits in self.by_period.items():
            if n % d != 0:
                continue
            for orb in orbits:
                pts.extend(orbit_points(self.spec, np.array(orb.point), d))
        return np.array(pts) if pts else np.zeros((0, 2))

    def db_path(self, out_dir):
        return os.path.join(out_dir, f"orbits_{self.spec.spec_hash()}.jsonl")

    def save(self, out_dir):
        os.makedirs(out_dir, exist_ok=True)
        path = self.db_path(out_dir)
        with open(path, "w", encoding="utf-8") as fh:
            for d in sorted(self.by_period):
                for orb in self.by_period[d]:
                    fh.write(json.dumps(orb.record()) + "\n")
        return path

    def load(self, out_dir):
        path = self.db_path(out_dir)
        if not os.path.exists(path):
            return self
        self.by_period = {}
        with open(path, "r", encoding="utf-8") as fh:
            for line in fh:
                rec = json.loads(line)
                orb = PeriodicOrbit(
                    point=tuple(rec["point"]),
                    period=rec["period"],
                    lattice_class=tuple(rec["class"]),
                    lambda_s=rec["lambda_s"],
                    lambda_u=rec["lambda_u"],
                    log_jac=rec["log_jac"],
                )
                self.by_period.setdefault(orb.period, []).append(orb)
        return self
