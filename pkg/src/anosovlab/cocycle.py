"""Stable density, affine leaf metric, cohomological equations, transfer maps.

Everything here is driven by the stable derivative cocycle
w(x) = log ||Df|E^s(x)||:

* the density rho(x,y) = exp sum_i [w(f^i y) - w(f^i x)] compares leaf
  volume at two points of one stable leaf (the sum converges because the
  two forward orbits collapse onto each other);
* the affine metric d^s(x,y) integrates rho(.,x) along the leaf, the
  coordinate in which Df|E^s acts affinely;
* cohomological equations psi = u o f - u are solved by exact partial
  sums along a dense forward orbit, extended by nearest-sample lookup;
* cocycles that need a backward orbit (inverse-limit data) are reduced
  to forward-only ones by the canonical-past correction u_hat.
"""

import csv
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.integrate import simpson
from scipy.spatial import cKDTree

from .errors import EmptyMatching, NotOnLeaf, ObstructionNonzero, OrbitNotDense
from .hyperbolic import (
    DEFAULT_DEPTH,
    PastChain,
    _oriented,
    _rk4_step,
    canonical_chain,
    log_stable_norm,
    make_chain,
    orbit_points,
    shift_chain,
    stable_direction,
)
from .torus import project, torus_delta, torus_distance

RHO_DEPTH_CAP = 200
RHO_INCREMENT_FLOOR = 1e-14


# ---------------------------------------------------------------------------
# cocycles

@dataclass(frozen=True)
class Cocycle:
    """A real-valued observable phi(x) or phi(x, past-chain).

    ``fn(spec, x, chain)`` evaluates the cocycle; when ``vectorized`` it
    must accept points of shape (n, 2) and return shape (n,) for
    chain-free evaluation.
    """

    kind: str                 # LogStableNorm | LogJacobian | Custom
    fn: Callable
    needs_past: bool = False
    vectorized: bool = True

    def __call__(self, spec, x, chain=None):
        return self.fn(spec, x, chain)

    def eval_many(self, spec, pts):
        pts = np.asarray(pts, dtype=float)
        if self.needs_past:
            raise ValueError("past-dependent cocycle needs chains; reduce it first")
        if self.vectorized:
            return np.asarray(self.fn(spec, pts, None), dtype=float)
        return np.array([float(self.fn(spec, p, None)) for p in pts])


def log_stable_cocycle(depth=DEFAULT_DEPTH):
    """w(x) = log ||Df|E^s(x)||, the stable derivative cocycle."""
    def fn(spec, x, chain=None):
        return log_stable_norm(spec, np.asarray(x, dtype=float), depth)
    return Cocycle(kind="LogStableNorm", fn=fn)


def log_jacobian_cocycle():
    """log |det Df(x)|."""
    def fn(spec, x, chain=None):
        return np.log(np.abs(np.linalg.det(spec.derivative(project(x)))))
    return Cocycle(kind="LogJacobian", fn=fn)


def custom_cocycle(fn, needs_past=False, vectorized=False):
    return Cocycle(kind="Custom", fn=fn, needs_past=needs_past,
                   vectorized=vectorized)


# ---------------------------------------------------------------------------
# the stable density rho

def _log_rho_many(spec, zs, x, depth=RHO_DEPTH_CAP, sdepth=DEFAULT_DEPTH,
                  s_switch=1e-4, s_floor=1e-12):
    """sum_i [w(f^i z) - w(f^i x)] = log rho(z, x) for leaf points zs.

    Convention: rho(a, b) carries the a-orbit norms in the numerator, so
    that the affine integrand is rho(z, x) = exp of this sum and the
    multiplicativity law reads rho(f a, f b) = (w_b / w_a) rho(a, b).

    The increments decay geometrically because the orbits collapse along
    the leaf -- but iterating both orbits naively is numerically fatal:
    round-off injects transverse components that the dynamics amplifies,
    so the computed orbits shadow-diverge after ~20 steps.  Once the
    separation is small the offset is therefore carried as a single
    leafwise arclength coordinate s with the one-dimensional recursion
    s -> +-(n s + n' s^2/2), n = ||Df|E^s||, which has no transverse
    noise to amplify; the handoff projection also strips the noise
    accumulated in the first phase.  Offset points are reconstructed
    with the leaf's curvature (second-order Taylor), keeping the
    parametrization error at O(s^3).
    """
    zs = np.atleast_2d(np.asarray(zs, dtype=float))
    acc = np.zeros(len(zs))
    t = project(np.vstack([zs, np.asarray(x, dtype=float)[None, :]]))
    steps = 0
    while steps < depth:
        if np.max(torus_distance(t[:-1], t[-1])) < s_switch:
            break
        w = log_stable_norm(spec, t, sdepth)
        acc += w[:-1] - w[-1]
        t = spec.eval_torus(t)
        steps += 1
    xi = t[-1]
    e = stable_direction(spec, xi, sdepth)
    s = torus_delta(t[:-1], xi) @ e
    fd = 1e-4
    while steps < depth:
        if np.max(np.abs(s)) < s_floor:
            break
        ep = _oriented(stable_direction(spec, xi + fd * e, sdepth), e)
        em = _oriented(stable_direction(spec, xi - fd * e, sdepth), e)
        de = (ep - em) / (2.0 * fd)          # curvature vector of the leaf
        pts = np.vstack([xi + s[:, None] * e[None, :]
                         + 0.5 * (s ** 2)[:, None] * de[None, :],
                         xi[None, :]])
        w = log_stable_norm(spec, pts, sdepth)
        acc += w[:-1] - w[-1]
        n0 = float(np.linalg.norm(spec.derivative(xi) @ e))
        npl = float(np.linalg.norm(spec.derivative(xi + fd * e) @ ep))
        nmi = float(np.linalg.norm(spec.derivative(xi - fd * e) @ em))
        dn = (npl - nmi) / (2.0 * fd)        # leafwise derivative of the norm
        v = spec.derivative(xi) @ e
        xi = spec.eval_torus(xi)
        e_next = stable_direction(spec, xi, sdepth)
        sgn = 1.0 if float(v @ e_next) >= 0.0 else -1.0
        s = sgn * (n0 * s + 0.5 * dn * s ** 2)
        e = e_next
        steps += 1
    return acc


# ---------------------------------------------------------------------------
# marching along the stable leaf

def _leaf_nodes(spec, x, y, step=1e-3, leaf_tol=1e-6, sdepth=24, max_len=1.0):
    """Uniform arclength nodes of the stable leaf arc from x to y.

    Marches the unit stable line field from x toward y with RK4 (pass 1
    finds the arclength, pass 2 lays down an even number of uniform
    steps), refining the final partial step so the last node lands on y.
    Returns (nodes on the cover, node spacing h, total arclength).
    Raises NotOnLeaf when y is not reached within leaf_tol.
    """
    x0 = project(np.asarray(x, dtype=float))
    target = x0 + torus_delta(y, x0)

    def fld(p):
        return stable_direction(spec, p, sdepth)

    v0 = fld(x0)
    sign = 1.0 if float(np.dot(v0, target - x0)) >= 0.0 else -1.0

    def march(n_steps, h):
        z = x0
        v_ref = sign * v0
        nodes = [z]
        for _ in range(n_steps):
            z, v_ref = _rk4_step(fld, z, v_ref, h)
            nodes.append(z)
        return np.array(nodes), v_ref

    # pass 1: coarse march to the foot of the perpendicular through y
    z = x0
    v_ref = sign * v0
    s = 0.0
    while True:
        tang = _oriented(fld(z), v_ref)
        ahead = float(np.dot(tang, target - z))
        if ahead <= step:
            break
        z, v_ref = _rk4_step(fld, z, v_ref, step)
        s += step
        if s > max_len:
            raise NotOnLeaf(f"no leaf arc from {tuple(x0)} reaches the target "
                            f"within arclength {max_len}")
    ds = float(np.dot(tang, target - z))
    perp = float(np.linalg.norm((target - z) - ds * tang))
    if perp > leaf_tol:
        raise NotOnLeaf(f"target off the stable leaf by {perp:.3e}")
    s_end = s + ds
    if s_end < 1e-15:
        return x0[None, :], 0.0, 0.0

    # pass 2: even number of uniform steps, Simpson-ready
    n_steps = 2 * max(2, int(math.ceil(s_end / (2.0 * step))))
    h = s_end / n_steps
    nodes, _ = march(n_steps, h)
    miss = float(np.linalg.norm(nodes[-1] - target))
    if miss > max(1e-7, 10 * leaf_tol):
        raise NotOnLeaf(f"leaf march missed the target by {miss:.3e}")
    nodes[-1] = target
    return nodes, h, s_end


def density_rho(spec, x, y, depth=RHO_DEPTH_CAP, leaf_tol=1e-6):
    """rho(x, y) = prod_i ||Df|E^s(f^i x)|| / ||Df|E^s(f^i y)||.

    Requires y on the stable leaf through x (checked by marching the
    leaf).  Satisfies the cocycle identity rho(x,y) rho(y,z) = rho(x,z),
    the multiplicativity law rho(f x, f y) = (w_y / w_x) rho(x, y) with
    w = ||Df|E^s||, and equals 1 identically for linear maps.
    """
    x = project(np.asarray(x, dtype=float))
    y = project(np.asarray(y, dtype=float))
    if torus_distance(x, y) < 1e-14:
        return 1.0
    _leaf_nodes(spec, x, y, step=2e-3, leaf_tol=leaf_tol)   # membership check
    return float(np.exp(-_log_rho_many(spec, y[None, :], x, depth)[0]))


def affine_distance(spec, x, y, step=1e-3, depth=RHO_DEPTH_CAP, leaf_tol=1e-6):
    """d^s(x, y) = integral of rho(z, x) over the leaf arc from x to y.

    The coordinate in which Df|E^s acts affinely:
    d^s(f x, f y) = ||Df|E^s(x)|| d^s(x, y) exactly, and
    d^s(y, x) = rho(x, y) d^s(x, y).  Composite Simpson quadrature on
    uniform arclength nodes laid down by an RK4 leaf march.
    """
    x = project(np.asarray(x, dtype=float))
    y = project(np.asarray(y, dtype=float))
    if torus_distance(x, y) < 1e-14:
        return 0.0
    nodes, h, s_end = _leaf_nodes(spec, x, y, step=step, leaf_tol=leaf_tol)
    if s_end == 0.0:
        return 0.0
    rho = np.exp(_log_rho_many(spec, nodes, x, depth))
    return float(simpson(rho, dx=h))


# ---------------------------------------------------------------------------
# periodic obstructions

def periodic_chain(spec, p, period, length):
    """Past chain at p whose past cycles backwards around the orbit."""
    cyc = orbit_points(spec, p, period)
    pts = np.array([cyc[(-i) % period] for i in range(length + 1)])
    branches = []
    for i in range(length):
        pre = spec.preimages(pts[i])
        branches.append(int(np.argmin(torus_distance(pre, pts[i + 1]))))
    return PastChain(points=pts, branches=tuple(branches))


def birkhoff_sum(spec, phi, p, period, chain_len=40):
    """Sum of phi over the periodic orbit of p."""
    if phi.needs_past:
        ch = periodic_chain(spec, np.asarray(p, dtype=float), period, chain_len)
        total = 0.0
        for _ in range(period):
            total += float(phi(spec, ch.base, ch))
            ch = shift_chain(spec, ch)
        return total
    return float(np.sum(phi.eval_many(spec, orbit_points(spec, p, period))))


def _pair_period(f, item):
    if len(item) >= 3:
        third = item[2]
        if isinstance(third, (int, np.integer)):
            return int(third)
        return int(third.period)
    p = project(np.asarray(item[0], dtype=float))
    for n in range(1, 64):
        if torus_distance(f.iterate_torus(p, n), p) < 1e-9:
            return n
    raise EmptyMatching(f"point {tuple(p)} is not periodic up to period 63")


def periodic_obstruction(f, g, matching, phi_f, phi_g):
    """max over matched orbits of |sum phi_f over p-orbit - sum phi_g over q-orbit|.

    Vanishing obstructions on all periodic orbits are the necessary
    condition for phi_f and phi_g to differ by a coboundary; `matching`
    holds (p, q, ...) tuples as produced by match_periodic_points.
    """
    if not matching:
        raise EmptyMatching("no matched orbits supplied")
    worst = 0.0
    for item in matching:
        n = _pair_period(f, item)
        sf = birkhoff_sum(f, phi_f, np.asarray(item[0], dtype=float), n)
        sg = birkhoff_sum(g, phi_g, np.asarray(item[1], dtype=float), n)
        worst = max(worst, abs(sf - sg))
    return worst


# ---------------------------------------------------------------------------
# transfer functions

@dataclass
class TransferFunction:
    """Samples of a function on the torus with nearest-sample lookup.

    ``values[i]`` is the function at ``points[i]``; lookup snaps to the
    nearest sample in the flat torus metric.  ``residual`` is the
    cocycle-equation defect at the held-out samples (round-off level for
    a true coboundary); ``drift`` is the per-step linear trend of the
    partial sums, a nonzero value flags a non-coboundary input;
    ``fill_radius`` is the largest gap a lookup may have to bridge.
    """

    points: np.ndarray
    values: np.ndarray
    fill_radius: float = math.nan
    residual: float = math.nan
    drift: float = 0.0
    held_points: Optional[np.ndarray] = None
    held_values: Optional[np.ndarray] = None
    meta: dict = field(default_factory=dict)

    def _get_tree(self):
        tree = self.meta.get("_tree")
        if tree is None:
            tree = cKDTree(self.points, boxsize=1.0)
            self.meta["_tree"] = tree
        return tree

    def __call__(self, x):
        x = project(np.asarray(x, dtype=float))
        single = x.ndim == 1
        _, idx = self._get_tree().query(np.atleast_2d(x))
        out = self.values[idx]
        return float(out[0]) if single else out

    def compare_with(self, fn):
        """Max deviation from fn at the held-out points, constant removed."""
        pts = self.held_points if self.held_points is not None else self.points
        vals = self.held_values if self.held_values is not None else self.values
        dev = vals - np.asarray(fn(pts), dtype=float)
        return float(np.max(np.abs(dev - np.median(dev))))

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["x1", "x2", "value"])
            for p, v in zip(self.points, self.values):
                w.writerow([f"{p[0]:.17g}", f"{p[1]:.17g}", f"{v:.17g}"])


def _fill_radius(points, grid_n=64):
    g = (np.arange(grid_n) + 0.5) / grid_n
    xx, yy = np.meshgrid(g, g, indexing="ij")
    centers = np.stack([xx.ravel(), yy.ravel()], axis=-1)
    d, _ = cKDTree(points, boxsize=1.0).query(centers)
    return float(np.max(d))


def _assemble_transfer(pts, psi_vals, resolution, holdout_every):
    """Partial sums u(x_k) = sum_{i<k} psi(x_i), split into table and held-out."""
    orbit_len = len(pts)
    u = np.concatenate([[0.0], np.cumsum(psi_vals[:-1])])
    held = np.zeros(orbit_len, dtype=bool)
    held[holdout_every::holdout_every] = True
    held[-1] = False            # its successor value is not tabulated
    kept = ~held
    fill = _fill_radius(pts[kept])
    if fill > resolution:
        raise OrbitNotDense(
            f"orbit fill radius {fill:.3e} exceeds resolution {resolution:.3e}; "
            "increase orbit_len")
    idx = np.nonzero(held)[0]
    residual = float(np.max(np.abs(psi_vals[idx] - (u[idx + 1] - u[idx])))) \
        if len(idx) else 0.0
    drift = float(np.polyfit(np.arange(orbit_len), u, 1)[0])
    return TransferFunction(
        points=pts[kept], values=u[kept],
        fill_radius=fill, residual=residual, drift=drift,
        held_points=pts[held], held_values=u[held])


def solve_coboundary(spec, psi, seed, orbit_len=20000, tol=1e-5,
                     resolution=1.0 / 32, obstruction=None, holdout_every=10):
    """Solve psi = u o f - u along the forward orbit of seed, u(seed) = 0.

    The partial sums are exact on the orbit, so ``residual`` (the
    cocycle-equation defect at held-out orbit samples) sits at round-off
    for any input; ``drift`` and ``compare_with`` carry the genuine
    coboundary evidence.  Off-orbit evaluation is nearest-sample only,
    accurate to the Hoelder modulus of u times ``fill_radius``.

    Pass the precomputed max periodic obstruction to enforce the
    necessary condition; it raises ObstructionNonzero above tol.
    """
    if obstruction is not None and abs(obstruction) > tol:
        raise ObstructionNonzero(
            f"max periodic obstruction {obstruction:.3e} exceeds tol {tol:.3e}")
    pts = np.empty((orbit_len, 2))
    t = project(np.asarray(seed, dtype=float))
    for i in range(orbit_len):
        pts[i] = t
        t = spec.eval_torus(t)
    psi_vals = psi.eval_many(spec, pts)
    return _assemble_transfer(pts, psi_vals, resolution, holdout_every)


# ---------------------------------------------------------------------------
# reduction of past-dependent cocycles to forward-only ones

@dataclass
class ChainTransfer:
    """u_hat(chain) = sum_{j<=J} [phi(shift^j chain) - phi(shift^j r chain)].

    r replaces the past by the canonical branch-0 chain at the same base;
    phi + u_hat o shift - u_hat then depends on the past only below the
    geometric tail of the series.
    """

    spec: object
    phi: Cocycle
    j_max: int

    def __call__(self, chain):
        y = chain
        z = canonical_chain(self.spec, chain.base, len(chain))
        total = 0.0
        for j in range(self.j_max + 1):
            total += float(self.phi(self.spec, y.base, y))
            total -= float(self.phi(self.spec, z.base, z))
            if j < self.j_max:
                y = shift_chain(self.spec, y)
                z = shift_chain(self.spec, z)
        return total


def chain_holder_modulus(spec, phi, samples=10, depth=20, rng=None):
    """(C, rate) with |phi(c1) - phi(c2)| <= C rate^j for chains sharing
    their first j branches; fitted on random chain pairs."""
    if rng is None:
        rng = np.random.default_rng(3)
    js, diffs = [], []
    for j in range(2, depth - 4, 3):
        worst = 0.0
        for _ in range(samples):
            base = rng.random(2)
            shared = list(rng.integers(0, spec.degree, size=j))
            tail1 = list(rng.integers(0, spec.degree, size=depth - j))
            tail2 = list(rng.integers(0, spec.degree, size=depth - j))
            c1 = make_chain(spec, base, shared + tail1)
            c2 = make_chain(spec, base, shared + tail2)
            worst = max(worst, abs(float(phi(spec, base, c1))
                                   - float(phi(spec, base, c2))))
        if worst > 0.0:
            js.append(j)
            diffs.append(worst)
    if len(js) < 2:
        return 0.0, 0.5
    slope, intercept = np.polyfit(js, np.log(diffs), 1)
    return float(np.exp(intercept)), float(min(np.exp(slope), 0.999))


def reduce_to_forward(spec, phi, j_max=30, chain_len=40):
    """Turn a past-dependent cocycle into a forward-only one.

    Returns (psi, u_hat) with psi(x) = phi(c) + u_hat(shift c) evaluated
    on the canonical chain c at x (for which u_hat(c) = 0 identically);
    psi and phi have equal Birkhoff sums over periodic chains up to the
    series tail, and psi's dependence on any supplied past is below
    u_hat's geometric tail bound.
    """
    u_hat = ChainTransfer(spec=spec, phi=phi, j_max=j_max)
    c_mod, rate = chain_holder_modulus(spec, phi)
    tail = c_mod * rate ** (j_max + 1) / max(1e-12, 1.0 - rate)

    def psi_fn(s, x, chain=None):
        c = chain if chain is not None else canonical_chain(s, x, chain_len)
        return (float(phi(s, c.base, c)) + u_hat(shift_chain(s, c)) - u_hat(c))

    psi = Cocycle(kind="Custom", fn=psi_fn, needs_past=False, vectorized=False)
    return psi, u_hat, tail


# ---------------------------------------------------------------------------
# the transfer function P of a conjugate pair

def leaf_companion(spec, x, sigma, depth=25):
    """A point on the stable leaf of x, exact to machine precision.

    Construction: offset by sigma along the stable direction at the depth-th
    forward iterate of x, then pull back through the branches of x's own
    orbit.  Pullback contracts transverse errors by 1/lam_u per step, so the
    result is co-leafed with x far beyond what a leaf integrator achieves;
    the leafwise separation from x is roughly sigma / lam_s**depth.
    """
    x = project(np.asarray(x, dtype=float))
    orbit = [x]
    for _ in range(depth):
        orbit.append(spec.eval_torus(orbit[-1]))
    e = stable_direction(spec, orbit[depth], DEFAULT_DEPTH)
    z = project(orbit[depth] + sigma * e)
    for i in range(depth - 1, -1, -1):
        pres = spec.preimages(z)
        z = pres[int(np.argmin(torus_distance(pres, orbit[i])))]
    return z


def _leaf_refine(spec, x, y, max_steps=40):
    """Project y onto the stable leaf of x to round-off accuracy.

    A numerically integrated leaf point sits off the true leaf by the
    integrator error (~1e-11).  Refinement: follow the pair forward to the
    iterate of closest approach, drop the transverse component there, and
    pull the corrected point back through the branch the orbit actually
    took.  Each pullback contracts the remaining transverse error by
    1/lam_u, so the result is co-leafed to machine precision.
    """
    t = project(np.vstack([np.asarray(y, dtype=float)[None, :],
                           np.asarray(x, dtype=float)[None, :]]))
    trail = [t]
    seps = [float(torus_distance(t[0], t[1]))]
    for _ in range(max_steps):
        t = spec.eval_torus(t)
        trail.append(t)
        seps.append(float(torus_distance(t[0], t[1])))
    m = int(np.argmin(seps))
    ym, xm = trail[m]
    e = stable_direction(spec, xm, DEFAULT_DEPTH)
    z = xm + (torus_delta(ym, xm) @ e) * e
    for i in range(m - 1, -1, -1):
        pres = spec.preimages(project(z))
        z = pres[int(np.argmin(torus_distance(pres, trail[i][0])))]
    return project(z)


def _leaf_probe(spec, x, sep, step=2e-4, refine=True):
    """A point at arclength sep from x along the stable leaf."""
    def fld(p):
        return stable_direction(spec, p, 24)
    z = project(np.asarray(x, dtype=float))
    v_ref = fld(z)
    n = max(4, int(math.ceil(sep / step)))
    h = sep / n
    for _ in range(n):
        z, v_ref = _rk4_step(fld, z, v_ref, h)
    if refine:
        z = _leaf_refine(spec, x, z)
    return z


def stable_dh_norm(f, g, h_fg, x, sep=1e-3):
    """Finite-difference ||DH|E^s(x)|| via the affine-metric ratio
    d^s_g(Hx, Hy) / d^s_f(x, y) at leaf separation sep."""
    x = project(np.asarray(x, dtype=float))
    y = _leaf_probe(f, x, sep)
    y_cover = x + torus_delta(y, x)
    hx, hy = h_fg(x), h_fg(y_cover)
    num = affine_distance(g, project(hx), project(hx + (hy - hx)),
                          step=min(1e-3, sep / 8), leaf_tol=1e-5)
    den = affine_distance(f, x, project(y_cover), step=min(1e-3, sep / 8))
    return num / den


def transfer_P(f, g, h_fg, samples=800, seed=(0.1357, 0.2468),
               tol=1e-4, resolution=0.08, obstruction=None,
               validate_points=3, fd_sep=1e-3, holdout_every=10):
    """P = e^U with log||Df|E^s(x)|| = log||Dg|E^s(H x)|| + U(f x) - U(x).

    U is the coboundary transfer of the stable-norm mismatch along a
    forward f-orbit; the returned table holds P normalized to geometric
    mean 1.  The ratio law ||DH|E^s(y)|| / ||DH|E^s(x)|| = P(x) / P(y)
    is cross-checked against finite-difference estimates at
    ``validate_points`` orbit samples; the worst relative deviation is
    reported in ``meta["ratio_check"]``.
    """
    if obstruction is not None and abs(obstruction) > tol:
        raise ObstructionNonzero(
            f"max periodic obstruction {obstruction:.3e} exceeds tol {tol:.3e}")
    pts = np.empty((samples, 2))
    t = project(np.asarray(seed, dtype=float))
    for i in range(samples):
        pts[i] = t
        t = f.eval_torus(t)
    w_f = log_stable_norm(f, pts)
    h_pts = h_fg(pts)
    w_g = log_stable_norm(g, project(h_pts))
    psi_vals = w_f - w_g
    tf = _assemble_transfer(pts, psi_vals, resolution, holdout_every)
    u_all = np.concatenate([tf.values, tf.held_values])
    center = float(np.mean(u_all))
    tf.values = np.exp(tf.values - center)
    tf.held_values = np.exp(tf.held_values - center)
    tf.meta["kind"] = "transfer-P"
    tf.meta["max_abs_U"] = float(np.max(np.abs(u_all - center)))

    if validate_points >= 2:
        idx = np.linspace(0, len(tf.points) - 1, validate_points).astype(int)
        dh = np.array([stable_dh_norm(f, g, h_fg, tf.points[i], sep=fd_sep)
                       for i in idx])
        p_vals = tf.values[idx]
        worst = 0.0
        for a in range(len(idx)):
            for b in range(a + 1, len(idx)):
                lhs = dh[b] / dh[a]
                rhs = p_vals[a] / p_vals[b]
                worst = max(worst, abs(lhs / rhs - 1.0))
        tf.meta["ratio_check"] = worst
    return tf
