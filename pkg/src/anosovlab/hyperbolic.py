"""Stable/unstable line fields, past chains, leaf segments, exponents.

The stable direction at x is the limit of most-contracted directions of
Df^n(x); unstable directions depend on a choice of backward orbit
(a PastChain).  Both are computed by normalized products of 2x2
derivative matrices; the contracted direction comes from the dominant
left-singular vector of the inverse product, which stays well
conditioned at any depth.
"""

import csv
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import ChainTooShort, DegenerateSpectrum
from .torus import angle_of, project, torus_distance

DEFAULT_DEPTH = 30


def default_depth(cert, tol=1e-12):
    ratio = cert.contraction_ub / cert.expansion_lb
    return max(8, int(math.ceil(math.log(tol) / math.log(ratio))))


# ---------------------------------------------------------------------------
# past chains

@dataclass(frozen=True)
class PastChain:
    """A finite backward orbit x_0, x_{-1}, ..., x_{-N} with branch labels.

    points[i] is x_{-i}; branches[i] selects which preimage (coset index)
    was taken from points[i] to points[i+1].  Branch 0 is the lift-induced
    branch (preimage of the canonical representative under the lift).
    """

    points: np.ndarray    # (N+1, 2) torus points
    branches: tuple       # N coset indices

    @property
    def base(self):
        return self.points[0]

    def __len__(self):
        return len(self.branches)

    def truncated(self, n):
        return PastChain(points=self.points[: n + 1], branches=self.branches[:n])

    def subchain(self, j):
        """Chain based at x_{-j} with the remaining past."""
        return PastChain(points=self.points[j:], branches=self.branches[j:])


def make_chain(spec, base, branches):
    base = project(np.asarray(base, dtype=float))
    pts = [base]
    for b in branches:
        pre = spec.preimages(pts[-1])
        pts.append(pre[int(b)])
    return PastChain(points=np.array(pts), branches=tuple(int(b) for b in branches))


def canonical_chain(spec, base, length):
    """The branch-0 (lift-induced) past, the canonical choice everywhere."""
    return make_chain(spec, base, [0] * length)


def random_chain(spec, base, length, rng):
    return make_chain(spec, base, rng.integers(0, spec.degree, size=length))


def shift_chain(spec, chain):
    """Image of the chain under the shift: base f(x_0), old base becomes past."""
    new_base = spec.eval_torus(chain.base)
    pts = np.vstack([new_base, chain.points])
    pre = spec.preimages(new_base)
    b0 = int(np.argmin(torus_distance(pre, chain.base)))
    return PastChain(points=pts, branches=(b0,) + chain.branches)


def chain_is_valid(spec, chain, tol=1e-10):
    imgs = spec.eval_torus(chain.points[1:])
    return bool(np.all(torus_distance(imgs, chain.points[:-1]) < tol))


# ---------------------------------------------------------------------------
# line fields

def stable_direction(spec, x, depth=DEFAULT_DEPTH):
    """Unit vector spanning the depth-truncated stable direction at x."""
    return stable_directions(spec, np.asarray(x, dtype=float)[None, :], depth)[0]


def stable_directions(spec, xs, depth=DEFAULT_DEPTH):
    """Batched stable directions: xs (n,2) -> unit vectors (n,2).

    Accumulates Df(x)^-1 Df(fx)^-1 ... Df(f^{d-1}x)^-1 with per-step
    normalization; the dominant left-singular vector of that product is
    the most-contracted right-singular direction of Df^d(x).
    """
    xs = project(np.asarray(xs, dtype=float))
    z = xs
    acc = None
    for _ in range(depth):
        d_inv = np.linalg.inv(spec.derivative(z))
        acc = d_inv if acc is None else acc @ d_inv
        norms = np.linalg.norm(acc, axis=(-2, -1), keepdims=True)
        acc = acc / norms
        z = spec.eval_torus(z)
    u, _, _ = np.linalg.svd(acc)
    vecs = u[:, :, 0]
    # canonical sign: first nonzero coordinate positive
    flip = np.where(np.abs(vecs[:, 0]) > 1e-14, np.sign(vecs[:, 0]), np.sign(vecs[:, 1]))
    return vecs * flip[:, None]


def unstable_direction(spec, chain):
    """Unit vector of the unstable direction determined by the chain's past."""
    pts = chain.points
    if len(chain) < 1:
        raise ChainTooShort("unstable_direction needs at least one past step")
    acc = None
    for i in range(len(chain), 0, -1):
        d = spec.derivative(pts[i])
        acc = d if acc is None else d @ acc
        acc = acc / np.linalg.norm(acc)
    u, _, _ = np.linalg.svd(acc)
    v = u[:, 0]
    if abs(v[0]) > 1e-14:
        v = v * np.sign(v[0])
    else:
        v = v * np.sign(v[1])
    return v


def unstable_directions_ensemble(spec, base, ensemble, depth, rng):
    """Directions over random-branch chains; returns (ensemble, 2) vectors."""
    out = []
    for _ in range(ensemble):
        out.append(unstable_direction(spec, random_chain(spec, base, depth, rng)))
    return np.array(out)


def log_stable_norm(spec, x, depth=DEFAULT_DEPTH):
    """log ||Df|E^s(x)||, scalar or batched."""
    xs = np.atleast_2d(np.asarray(x, dtype=float))
    vs = stable_directions(spec, xs, depth)
    dv = np.einsum("nij,nj->ni", spec.derivative(project(xs)), vs)
    out = np.log(np.linalg.norm(dv, axis=-1))
    return out if np.asarray(x).ndim > 1 else float(out[0])


def log_unstable_norm_chain(spec, chain):
    """log ||Df|E^u(x_0, past)|| at the chain's base."""
    v = unstable_direction(spec, chain)
    dv = spec.derivative(chain.base) @ v
    return float(np.log(np.linalg.norm(dv)))


# ---------------------------------------------------------------------------
# leaf segments

@dataclass
class LeafSegment:
    """Arclength-parametrized polyline on the universal cover.

    points are cover coordinates lifted continuously; base_index locates
    the seed point; t is the signed arclength table (t[base_index] = 0).
    """

    points: np.ndarray
    t: np.ndarray
    kind: str
    base_index: int
    past: Optional[PastChain] = None

    @property
    def length(self):
        return float(self.t[-1] - self.t[0])

    def torus_points(self):
        return project(self.points)

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "x1", "x2"])
            for ti, p in zip(self.t, self.points):
                w.writerow([f"{ti:.17g}", f"{p[0]:.17g}", f"{p[1]:.17g}"])

    def point_at(self, s):
        """Linear interpolation at arclength s."""
        s = np.clip(s, self.t[0], self.t[-1])
        i = np.searchsorted(self.t, s)
        i = int(np.clip(i, 1, len(self.t) - 1))
        w = (s - self.t[i - 1]) / (self.t[i] - self.t[i - 1])
        return (1 - w) * self.points[i - 1] + w * self.points[i]

    def nearest(self, q, torus=True):
        """(distance, arclength) of the nearest polyline point to q.

        With torus=True the comparison is in the quotient metric.
        """
        pts = self.points
        if torus:
            d = torus_distance(pts, np.asarray(q, dtype=float))
        else:
            d = np.linalg.norm(pts - np.asarray(q, dtype=float), axis=-1)
        i = int(np.argmin(d))
        return float(d[i]), float(self.t[i]), i


def _oriented(v, ref):
    return v if float(np.dot(v, ref)) >= 0.0 else -v


def _rk4_step(field, x, v_ref, h):
    k1 = _oriented(field(x), v_ref)
    k2 = _oriented(field(x + 0.5 * h * k1), k1)
    k3 = _oriented(field(x + 0.5 * h * k2), k1)
    k4 = _oriented(field(x + h * k3), k1)
    return x + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4), k1


def integrate_line_field(field, x0, halflength, step):
    """Integrate a unit line field both ways from x0; orientation propagated."""
    x0 = np.asarray(x0, dtype=float)
    n_steps = max(1, int(math.ceil(halflength / step)))
    h = halflength / n_steps
    v0 = field(x0)
    fwd = [x0]
    v_ref = v0
    x = x0
    for _ in range(n_steps):
        x, v_ref = _rk4_step(field, x, v_ref, h)
        fwd.append(x)
    bwd = [x0]
    v_ref = -v0
    x = x0
    for _ in range(n_steps):
        x, v_ref = _rk4_step(field, x, v_ref, h)
        bwd.append(x)
    pts = np.array(bwd[::-1] + fwd[1:])
    t = np.concatenate([np.cumsum(np.r_[0.0, np.linalg.norm(np.diff(pts, axis=0), axis=1)])])
    base_index = n_steps
    t = t - t[base_index]
    return pts, t, base_index


def stable_leaf_segment(spec, x, halflength, step=1e-3, depth=DEFAULT_DEPTH):
    """Local stable leaf through x as an arclength polyline on the cover."""
    def field(p):
        return stable_direction(spec, p, depth)

    pts, t, bi = integrate_line_field(field, project(np.asarray(x, dtype=float)), halflength, step)
    return LeafSegment(points=pts, t=t, kind="stable", base_index=bi)


def unstable_segment(spec, chain, radius, step=1e-3, expansion_lb=None, seed_halflength=None):
    """Local unstable leaf through the chain's base.

    A short segment tangent to the unstable direction at the deep end of
    the chain is pushed forward; each push multiplies lengths by at least
    expansion_lb, so the seed must satisfy expansion_lb^N * seed >= radius.
    """
    n = len(chain)
    if n < 1:
        raise ChainTooShort("unstable_segment needs a nonempty past")
    if expansion_lb is None:
        expansion_lb = abs(spec.model.lam_u) * 0.8
    need = radius / expansion_lb ** n
    if seed_halflength is None:
        seed_halflength = max(1e-4, 1.3 * need)
    if seed_halflength > 0.05:
        raise ChainTooShort(
            f"chain of length {n} cannot reach radius {radius}: "
            f"seed half-length {seed_halflength:.3g} too long")

    # seed direction at the deep end: the pushforward forgets it at rate
    # (lam_s/lam_u)^N, so the linear model's unstable axis is good enough
    deep = chain.points[-1]
    d_seed = spec.model.e_u
    m = max(8, int(math.ceil(2 * seed_halflength / min(step, seed_halflength / 4))))
    s = np.linspace(-seed_halflength, seed_halflength, 2 * m + 1)
    pts = deep + s[:, None] * d_seed[None, :]
    for i in range(n, 0, -1):
        pts = spec.eval_lift(pts)
        # recentre to keep cover coordinates small; the torus image is unchanged
        bi = int(np.argmin(torus_distance(project(pts), chain.points[i - 1])))
        pts = pts - np.floor(pts[bi])
        # keep the working window bounded: trim around the current base image
        t = np.r_[0.0, np.cumsum(np.linalg.norm(np.diff(pts, axis=0), axis=1))]
        target = radius / expansion_lb ** (i - 1) * 1.3 + 5 * step
        keep = (t >= t[bi] - target) & (t <= t[bi] + target)
        pts = pts[keep]
        t = t[keep]
        # resample by arclength to keep vertex spacing at the requested step
        t = t - t[0]
        total = t[-1]
        n_new = max(16, int(math.ceil(total / step)))
        s_new = np.linspace(0.0, total, n_new + 1)
        pts = np.stack([np.interp(s_new, t, pts[:, 0]), np.interp(s_new, t, pts[:, 1])], axis=-1)
    t = np.r_[0.0, np.cumsum(np.linalg.norm(np.diff(pts, axis=0), axis=1))]
    bi = int(np.argmin(torus_distance(project(pts), chain.base)))
    keep = (t >= t[bi] - radius) & (t <= t[bi] + radius)
    pts, t = pts[keep], t[keep]
    bi = int(np.argmin(torus_distance(project(pts), chain.base)))
    t = t - t[bi]
    return LeafSegment(points=pts, t=t, kind="unstable", base_index=bi, past=chain)


# ---------------------------------------------------------------------------
# exponents

def orbit_points(spec, p, period):
    pts = [project(np.asarray(p, dtype=float))]
    for _ in range(period - 1):
        pts.append(spec.eval_torus(pts[-1]))
    return np.array(pts)


def period_matrix(spec, pts):
    """Df^n along the orbit, with scale factored out: (matrix, log_scale)."""
    acc = np.eye(2)
    log_scale = 0.0
    for p in pts:
        acc = spec.derivative(p) @ acc
        s = np.linalg.norm(acc)
        acc = acc / s
        log_scale += math.log(s)
    return acc, log_scale


def periodic_exponents(spec, p, period, tol=1e-12):
    """(lambda_s, lambda_u) per-iterate exponents of a verified periodic orbit."""
    pts = orbit_points(spec, p, period)
    closure = torus_distance(spec.eval_torus(pts[-1]), pts[0])
    if closure > 1e-9:
        raise DegenerateSpectrum(f"orbit does not close up: gap {closure:.3e}")
    m, log_scale = period_matrix(spec, pts)
    ev = np.linalg.eigvals(m)
    if abs(ev[0].imag) > 1e-9 or abs(ev[1].imag) > 1e-9:
        raise DegenerateSpectrum("complex return-map spectrum")
    mods = np.sort(np.abs(ev.real))
    log_mu = np.log(mods) + log_scale
    lam_s = log_mu[0] / period
    lam_u = log_mu[1] / period
    if lam_s >= -1e-12 or lam_u <= 1e-12:
        raise DegenerateSpectrum(f"return-map eigenvalue on the unit circle: {log_mu}")
    return float(lam_s), float(lam_u)


def orbit_log_jacobian(spec, p, period):
    """log |det Df^n| summed along the orbit."""
    pts = orbit_points(spec, p, period)
    dets = np.linalg.det(spec.derivative(pts))
    return float(np.sum(np.log(np.abs(dets))))


def angular_gap(v1, v2):
    from .torus import angular_distance
    return angular_distance(angle_of(v1), angle_of(v2))
