"""Bounded conjugacy to the linear model, and between two maps.

For F(x) = A x + P(x) the unique bounded solution of A o H = H o F with
H = Id + h splits in the A-eigenbasis into

    h^u(x) =  sum_{k>=0} lam_u^{-(k+1)} P^u(F^k x)     (Z^2-periodic)
    h^s(x) = -sum_{k>=1} lam_s^{k-1}   P^s(F^{-k} x)   (not periodic)

The unstable series only sees the torus orbit.  The stable series walks
the backward orbit of the plane lift; coordinates there grow like
|1/lam_s|^k, so points are carried as (fractional part, integer lattice
vector) with the lattice arithmetic exact -- the periodic integrand is
then always evaluated at full precision.

The deck-commutation defect h(x+n) - h(x) lives purely in the stable
component and vanishes exactly when the map is special.
"""

import csv
from dataclasses import dataclass

import numpy as np

from .errors import ChainNotLiftRealizable, NewtonDivergence, NoConvergence, PeriodMismatch
from .hyperbolic import PastChain
from .torus import coset_reps, project, torus_distance

DEFAULT_FIELD_DEPTH = 40


def displacement(spec, x):
    """P(x) = F(x) - A x; Z^2-periodic by construction."""
    x = np.asarray(x, dtype=float)
    return spec.eval_lift(x) - x @ spec.model.a.T.astype(float)


# ---------------------------------------------------------------------------
# exact-lattice backward steps

def split_cover(x):
    """Cover point -> (fractional part in [0,1)^2, exact integer lattice)."""
    x = np.asarray(x, dtype=float)
    fl = np.floor(x)
    lattice = np.empty(x.shape, dtype=object)
    flat_l = lattice.reshape(-1)
    flat_f = fl.reshape(-1)
    for i in range(flat_l.size):
        flat_l[i] = int(flat_f[i])
    return x - fl, lattice


def _adjugate_int(a):
    return ((int(a[1, 1]), -int(a[0, 1])), (-int(a[1, 0]), int(a[0, 0])))


class _BackwardWalker:
    """One exact backward step of the plane lift in (frac, lattice) form.

    F^{-1}(t + n) = s + m with s the Newton solve of F(s) = t + r for the
    coset representative r of n mod A Z^2, and m = A^{-1}(n - r) plus the
    integer part of s; all lattice arithmetic in exact Python integers.
    """

    def __init__(self, spec):
        self.spec = spec
        a = spec.model.a
        self.det = int(spec.model.det)
        self.adj = _adjugate_int(a)
        reps = coset_reps(a)
        self.rep_by_key = {}
        for r in reps:
            self.rep_by_key[self._key(r[0], r[1])] = r

    def _key(self, n0, n1):
        (a00, a01), (a10, a11) = self.adj
        return ((a00 * n0 + a01 * n1) % self.det, (a10 * n0 + a11 * n1) % self.det)

    def step(self, frac, lattice):
        n = frac.shape[0]
        reps = np.zeros((n, 2))
        m1 = np.empty((n, 2), dtype=object)
        (a00, a01), (a10, a11) = self.adj
        for i in range(n):
            n0, n1 = lattice[i, 0], lattice[i, 1]
            r = self.rep_by_key[self._key(n0, n1)]
            d0, d1 = n0 - r[0], n1 - r[1]
            m1[i, 0] = (a00 * d0 + a01 * d1) // self.det
            m1[i, 1] = (a10 * d0 + a11 * d1) // self.det
            reps[i] = r
        s = self.spec.invert_lift(frac + reps)
        fl = np.floor(s)
        new_frac = s - fl
        new_lattice = np.empty((n, 2), dtype=object)
        for i in range(n):
            new_lattice[i, 0] = m1[i, 0] + int(fl[i, 0])
            new_lattice[i, 1] = m1[i, 1] + int(fl[i, 1])
        return new_frac, new_lattice


# ---------------------------------------------------------------------------
# the conjugacy field

@dataclass
class SpecialnessReport:
    defect: float
    noise_floor: float
    verdict: str          # Special | NonSpecial | Inconclusive
    samples: int


class ConjugacyField:
    """h = H - Id for the bounded conjugacy A o H = H o F.

    ``hu``/``hs`` evaluate the truncated eigen-component series directly;
    ``hu_grid`` additionally tabulates the periodic unstable component on
    an M x M grid (bilinear interpolation via ``hu_interp``).  The stable
    component is never tabulated: it is not periodic, so no finite torus
    table represents it.
    """

    def __init__(self, spec, depth=DEFAULT_FIELD_DEPTH, grid_m=256):
        self.spec = spec
        self.depth = int(depth)
        self.grid_m = int(grid_m)
        self._walker = _BackwardWalker(spec)
        sup_u, sup_s = spec.perturbation_sup_eigen()
        lam_u, lam_s = spec.model.lam_u, spec.model.lam_s
        self.tail_u = sup_u * abs(lam_u) ** (-(self.depth + 1)) / (abs(lam_u) - 1.0)
        self.tail_s = sup_s * abs(lam_s) ** self.depth / (1.0 - abs(lam_s))
        bu = sup_u / (abs(lam_u) - 1.0)
        bs = sup_s / (1.0 - abs(lam_s))
        self.bound = float(np.linalg.norm(spec.model.basis, 2) * np.hypot(bu, bs))
        g = np.arange(self.grid_m) / self.grid_m
        xx, yy = np.meshgrid(g, g, indexing="ij")
        pts = np.stack([xx.ravel(), yy.ravel()], axis=-1)
        self.hu_grid = self.hu(pts).reshape(self.grid_m, self.grid_m)
        self.residual = None   # filled by residual_sup

    # -- eigen components -------------------------------------------------
    def hu(self, x):
        """Unstable eigen-component of h; x on cover or torus (periodic)."""
        t = project(np.asarray(x, dtype=float))
        shape = t.shape[:-1]
        t = t.reshape(-1, 2)
        lam_u = self.spec.model.lam_u
        acc = np.zeros(t.shape[0])
        w = 1.0 / lam_u
        for _ in range(self.depth + 1):
            pu = self.spec.model.to_eigen(self.spec.perturbation(t))[:, 0]
            acc += w * pu
            w /= lam_u
            t = self.spec.eval_torus(t)
        return acc.reshape(shape)

    def hu_interp(self, x):
        """Bilinear periodic interpolation of the tabulated h^u grid."""
        t = project(np.asarray(x, dtype=float)) * self.grid_m
        i0 = np.floor(t).astype(int)
        w = t - i0
        i0 %= self.grid_m
        i1 = (i0 + 1) % self.grid_m
        g = self.hu_grid
        return ((1 - w[..., 0]) * (1 - w[..., 1]) * g[i0[..., 0], i0[..., 1]]
                + w[..., 0] * (1 - w[..., 1]) * g[i1[..., 0], i0[..., 1]]
                + (1 - w[..., 0]) * w[..., 1] * g[i0[..., 0], i1[..., 1]]
                + w[..., 0] * w[..., 1] * g[i1[..., 0], i1[..., 1]])

    def hs(self, x):
        """Stable eigen-component at cover points x (NOT periodic)."""
        x = np.asarray(x, dtype=float)
        shape = x.shape[:-1]
        frac, lattice = split_cover(x.reshape(-1, 2))
        return self.hs_frac(frac, lattice).reshape(shape)

    def hs_frac(self, frac, lattice):
        """Stable component at points given as (frac in [0,1)^2, exact lattice)."""
        lam_s = self.spec.model.lam_s
        acc = np.zeros(frac.shape[0])
        w = 1.0
        t, n = frac, lattice
        for _ in range(self.depth):
            t, n = self._walker.step(t, n)
            ps = self.spec.model.to_eigen(self.spec.perturbation(t))[:, 1]
            acc += w * ps
            w *= lam_s
        return -acc

    # -- assembled maps ---------------------------------------------------
    def h(self, x):
        """Displacement H - Id at cover points, standard coordinates."""
        comps = np.stack([self.hu(x), self.hs(x)], axis=-1)
        return self.spec.model.from_eigen(comps)

    def h_frac(self, frac, lattice):
        comps = np.stack(
            [self.hu(frac), self.hs_frac(frac, lattice)], axis=-1)
        return self.spec.model.from_eigen(comps)

    def conjugacy(self, x):
        """H(x) = x + h(x) on the cover."""
        x = np.asarray(x, dtype=float)
        return x + self.h(x)

    def residual_sup(self, grid_n=16):
        """sup |A H(x) - H(F x)| over a validation grid."""
        g = (np.arange(grid_n) + 0.31) / grid_n
        xx, yy = np.meshgrid(g, g, indexing="ij")
        pts = np.stack([xx.ravel(), yy.ravel()], axis=-1)
        a = self.spec.model.a.astype(float)
        lhs = self.conjugacy(pts) @ a.T
        rhs = self.conjugacy(self.spec.eval_lift(pts))
        self.residual = float(np.max(np.linalg.norm(lhs - rhs, axis=-1)))
        return self.residual

    def export_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["depth", "bound", "residual"])
            w.writerow([self.depth, f"{self.bound:.17g}",
                        "" if self.residual is None else f"{self.residual:.17g}"])
            for row in self.hu_grid:
                w.writerow([f"{v:.17g}" for v in row])


def conjugacy_to_linear(spec, depth=DEFAULT_FIELD_DEPTH, grid_m=256):
    return ConjugacyField(spec, depth=depth, grid_m=grid_m)


# ---------------------------------------------------------------------------
# specialness

def specialness_defect(spec, field, samples=64, rng=None,
                       generators=((1, 0), (0, 1))):
    """Deck-commutation defect max |h(x+n) - h(x)| over lattice generators.

    h^u is exactly periodic, so the defect is carried by the stable
    component; it vanishes iff the map is special.  The verdict bands are
    set by the truncation noise floor: Special below 3x, NonSpecial above
    10x, Inconclusive between.
    """
    if rng is None:
        rng = np.random.default_rng(7)
    pts = rng.random((samples, 2))
    defect = 0.0
    base = field.h(pts)
    for n in generators:
        shifted = field.h(pts + np.array(n, dtype=float))
        defect = max(defect, float(np.max(np.linalg.norm(shifted - base, axis=-1))))
    floor = 2.0 * (field.tail_s + field.tail_u) + 1e-12
    if defect < 3.0 * floor:
        verdict = "Special"
    elif defect > 10.0 * floor:
        verdict = "NonSpecial"
    else:
        verdict = "Inconclusive"
    return SpecialnessReport(defect=defect, noise_floor=floor,
                             verdict=verdict, samples=samples)


# ---------------------------------------------------------------------------
# conjugacy between two maps with the same linear part

def _displacement_bound(spec):
    sup_u, sup_s = spec.perturbation_sup_eigen()
    bu = sup_u / (abs(spec.model.lam_u) - 1.0)
    bs = sup_s / (1.0 - abs(spec.model.lam_s))
    return float(np.linalg.norm(spec.model.basis, 2) * np.hypot(bu, bs))


class ConjugacyBetween:
    """H_fg = H_G^{-1} o H_F, the bounded conjugacy with G o H_fg = H_fg o F.

    Evaluated pointwise by orbit shadowing: the F-orbit of x is a
    pseudo-orbit of G with bounded defects, and H_fg(x) is the time-0
    point of the unique G-orbit shadowing it.  The shadowing problem is a
    Newton solve of a block-bidiagonal system over a finite orbit window;
    H itself -- merely Hoelder, with local difference quotients above 1 --
    is never differentiated, only G is.
    """

    def __init__(self, f, g, depth=56):
        if not np.array_equal(f.model.a, g.model.a):
            raise PeriodMismatch("maps have different linear parts")
        self.f = f
        self.g = g
        self.depth = int(depth)
        self._walker = _BackwardWalker(f)
        self.bound = _displacement_bound(f) + _displacement_bound(g)

    def _orbit_window(self, frac, lattice):
        """Torus coordinates of F^j x for j in [-depth, depth], (P, 2K+1, 2)."""
        k = self.depth
        p = frac.shape[0]
        ts = np.empty((p, 2 * k + 1, 2))
        ts[:, k] = frac
        t = frac
        for j in range(1, k + 1):
            t = self.f.eval_torus(t)
            ts[:, k + j] = t
        t, n = frac, lattice
        for j in range(1, k + 1):
            t, n = self._walker.step(t, n)
            ts[:, k - j] = t
        return ts

    def _shadow_offsets(self, ts, tol=1e-12, max_iter=30, step_cap=0.1):
        """Solve for the shadowing G-orbit offsets d_j; returns d_0 (P, 2).

        The target map is reached by continuation through the blend
        G_t = A + (1-t) P_F + t P_G: at t = 0 the F-orbit shadows itself
        exactly, and each stage tracks the offsets, keeping Newton inside
        the basin of the deck-canonical shadowing branch (full steps from
        d = 0 can overshoot onto a fold between deck-shifted branches).
        """
        from scipy.linalg import solve_banded
        p, width, _ = ts.shape
        k2 = width - 1                      # number of orbit steps
        n = 2 * width                       # unknowns: offsets at each vertex
        # integer deck parts of the F-orbit: F(t_j) = t_{j+1} + m_j
        pts0 = ts[:, :-1].reshape(-1, 2)
        fx0 = self.f.eval_lift(pts0)
        m = np.rint(fx0.reshape(p, k2, 2) - ts[:, 1:])

        def blend_eval(pts, t):
            if t == 1.0:
                return self.g.eval_lift(pts)
            return (1.0 - t) * self.f.eval_lift(pts) + t * self.g.eval_lift(pts)

        def blend_deriv(pts, t):
            if t == 1.0:
                return self.g.derivative(pts)
            return (1.0 - t) * self.f.derivative(pts) + t * self.g.derivative(pts)

        def bc_rows(dg):
            """Boundary rows adapted to the cocycle's invariant directions.

            The homogeneous stable mode of the window is tilted away from
            the linear model's e_s by O(eps); constraining it with the
            model's eigenbasis injects a large spurious stable mode at the
            past end.  Instead the rows annihilate the cocycle's own
            contracted direction at the past end and expanded direction at
            the future end.
            """
            mdepth = min(15, k2)
            acc = None
            for j in range(mdepth):
                di = np.linalg.inv(dg[:, j])
                acc = di if acc is None else acc @ di
                acc = acc / np.linalg.norm(acc, axis=(-2, -1), keepdims=True)
            u, _, _ = np.linalg.svd(acc)
            vs = u[:, :, 0]                  # contracted direction at the past end
            acc = None
            for j in range(k2 - mdepth, k2):
                acc = dg[:, j] if acc is None else dg[:, j] @ acc
                acc = acc / np.linalg.norm(acc, axis=(-2, -1), keepdims=True)
            u, _, _ = np.linalg.svd(acc)
            vu = u[:, :, 0]                  # expanded direction at the future end
            # rows must pair nonsingularly with the homogeneous modes: the
            # forward-decaying mode is along vs at the past end, the
            # forward-growing mode along vu at the future end
            return vs, vu

        def residual(d, t, top, bot):
            gz = blend_eval((ts[:, :-1] + d[:, :-1]).reshape(-1, 2), t).reshape(p, k2, 2)
            res = np.empty((p, n))
            # boundary: offsets confined to the contracted direction at the
            # past end and the expanded direction at the future end
            res[:, 0] = np.einsum("ij,ij->i", d[:, 0], top)
            res[:, -1] = np.einsum("ij,ij->i", d[:, -1], bot)
            res[:, 1:-1] = (gz - ts[:, 1:] - m - d[:, 1:]).reshape(p, -1)
            return res

        def newton(d, t):
            dg = blend_deriv((ts[:, :-1] + d[:, :-1]).reshape(-1, 2), t).reshape(p, k2, 2, 2)
            top, bot = bc_rows(dg)
            res = residual(d, t, top, bot)
            q = np.arange(k2)
            for it in range(max_iter):
                if np.max(np.abs(res)) < tol:
                    return d, True
                if it > 0:
                    dg = blend_deriv((ts[:, :-1] + d[:, :-1]).reshape(-1, 2), t).reshape(p, k2, 2, 2)
                # banded Jacobian, bandwidth (2, 2) in scipy's ab layout
                ab = np.zeros((p, 5, n))
                ab[:, 3, 2 * q] = dg[:, q, 0, 0]
                ab[:, 2, 2 * q + 1] = dg[:, q, 0, 1]
                ab[:, 4, 2 * q] = dg[:, q, 1, 0]
                ab[:, 3, 2 * q + 1] = dg[:, q, 1, 1]
                ab[:, 1, 2 * q + 2] = -1.0
                ab[:, 1, 2 * q + 3] = -1.0
                ab[:, 2, 0] = top[:, 0]
                ab[:, 1, 1] = top[:, 1]
                ab[:, 3, n - 2] = bot[:, 0]
                ab[:, 2, n - 1] = bot[:, 1]
                step = np.empty((p, width, 2))
                for i in range(p):
                    step[i] = solve_banded((2, 2), ab[i], res[i]).reshape(width, 2)
                # trust region: never move a vertex by more than step_cap
                smax = np.max(np.abs(step), axis=(1, 2))
                lam = np.minimum(1.0, step_cap / np.maximum(smax, 1e-300))
                rnorm = np.linalg.norm(res, axis=1)
                improved = np.zeros(p, dtype=bool)
                for _ in range(25):
                    trial = d - lam[:, None, None] * step
                    rtrial = residual(trial, t, top, bot)
                    rt = np.linalg.norm(rtrial, axis=1)
                    improved = rt <= rnorm * (1.0 - 0.2 * lam) + tol
                    if np.all(improved):
                        break
                    lam = np.where(improved, lam, lam * 0.5)
                if not np.any(improved) and np.max(np.abs(res)) > tol:
                    return d, False
                d, res = trial, rtrial
            return d, bool(np.max(np.abs(res)) < tol)

        d = np.zeros((p, width, 2))
        t = 0.0
        dt = 1.0
        while t < 1.0:
            t_next = min(1.0, t + dt)
            d_new, ok = newton(d.copy(), t_next)
            if ok:
                d, t = d_new, t_next
                dt = min(1.0, dt * 2.0)
            else:
                dt *= 0.5
                if dt < 1e-3:
                    raise NewtonDivergence(
                        f"shadowing continuation stalled at blend t = {t:.4f}")
        return d[:, width // 2]

    def _offsets(self, frac, lattice, chunk=512):
        out = np.empty_like(frac)
        for i in range(0, frac.shape[0], chunk):
            ts = self._orbit_window(frac[i:i + chunk], lattice[i:i + chunk])
            out[i:i + chunk] = self._shadow_offsets(ts)
        return out

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        shape = x.shape
        frac, lattice = split_cover(x.reshape(-1, 2))
        return (x.reshape(-1, 2) + self._offsets(frac, lattice)).reshape(shape)

    def map_frac(self, frac, lattice):
        """Torus image pi(H_fg(z)) for z = frac + lattice, exact lattice."""
        return project(frac + self._offsets(frac, lattice))

    def residual_sup(self, grid_n=12):
        """sup |G(H_fg x) - H_fg(F x)| over a validation grid."""
        g = (np.arange(grid_n) + 0.41) / grid_n
        xx, yy = np.meshgrid(g, g, indexing="ij")
        pts = np.stack([xx.ravel(), yy.ravel()], axis=-1)
        lhs = self.g.eval_lift(self(pts))
        rhs = self(self.f.eval_lift(pts))
        return float(np.max(np.linalg.norm(lhs - rhs, axis=-1)))


def conjugacy_between(f, g, depth=56):
    return ConjugacyBetween(f, g, depth=depth)


# ---------------------------------------------------------------------------
# chains and periodic matching through H_fg

def lift_realize_chain(spec, chain, tol=1e-9):
    """Realize a past chain as a single lift orbit in (frac, lattice) form.

    Anchored at the deep end with lattice 0 and propagated forward through
    F(t + n) = F(t) + A n; the lattice recursion n_i = A n_{i+1} + d_i is
    exact, with d_i the (integer) deck part of F(t_{i+1}) - t_i.
    """
    pts = chain.points
    n_steps = len(chain)
    a = spec.model.a
    lattices = [None] * (n_steps + 1)
    lattices[n_steps] = (0, 0)
    imgs = spec.eval_lift(pts[1:]) if n_steps else np.zeros((0, 2))
    for i in range(n_steps - 1, -1, -1):
        d = imgs[i] - pts[i]
        di = np.rint(d)
        if np.max(np.abs(d - di)) > tol:
            raise ChainNotLiftRealizable(
                f"chain step {i}: deck part off-lattice by "
                f"{float(np.max(np.abs(d - di))):.3e}")
        nz = lattices[i + 1]
        lattices[i] = (int(a[0, 0]) * nz[0] + int(a[0, 1]) * nz[1] + int(di[0]),
                       int(a[1, 0]) * nz[0] + int(a[1, 1]) * nz[1] + int(di[1]))
    frac = np.array(pts, dtype=float)
    lattice = np.empty((n_steps + 1, 2), dtype=object)
    for i, nz in enumerate(lattices):
        lattice[i, 0], lattice[i, 1] = nz
    return frac, lattice


def induced_orbit_conjugacy(f, g, h_fg, chain, tol=1e-9):
    """Push a past chain of f through H_fg to the corresponding g-chain.

    The chain is realized as a lift orbit, mapped vertexwise by H_fg, and
    reassembled (with branch labels) as a g-past chain.
    """
    frac, lattice = lift_realize_chain(f, chain, tol=tol)
    imgs = h_fg.map_frac(frac, lattice)
    branches = []
    for i in range(len(chain)):
        pre = g.preimages(imgs[i])
        branches.append(int(np.argmin(torus_distance(pre, imgs[i + 1]))))
    return PastChain(points=imgs, branches=tuple(branches))


def _lattice_class_key(spec, q, n):
    """Class of the period-n point q in Z^2 / (A^n - I) Z^2 (injective key)."""
    from .orbits import matrix_power_int
    from .torus import _class_key
    an_i = matrix_power_int(spec.model.a, n) - np.eye(2, dtype=np.int64)
    det = int(round(np.linalg.det(an_i.astype(float))))
    z = project(np.asarray(q, dtype=float))
    for _ in range(n):
        z = spec.eval_lift(z)
    m = np.rint(z - project(np.asarray(q, dtype=float))).astype(np.int64)
    return _class_key(an_i, det, m)


def match_periodic(f, g, h_fg, orbit, db_g, tol=1e-6, max_steps=30):
    """The g-periodic point matched to the given f-orbit point.

    For a genuinely conjugate pair, pi(H_fg(p_hat)) lands on the matched
    point directly.  Otherwise the lattice class m of the lift equation
    F^n(p_hat) = p_hat + m identifies the partner: classes biject with
    period-n points and are preserved by any conjugacy homotopic to the
    identity, so the class match is the canonical candidate pairing even
    when no conjugacy exists (which the exponent comparison then detects).
    """
    n = orbit.period
    db_g.ensure(n)
    cands = []
    for d, orbits in db_g.by_period.items():
        if n % d != 0:
            continue
        for orb in orbits:
            from .hyperbolic import orbit_points
            for q in orbit_points(g, np.array(orb.point), d):
                cands.append((q, orb))
    if not cands:
        raise NoConvergence(f"no period-{n} candidates in the g database")
    cand_pts = np.array([c[0] for c in cands])
    z = project(h_fg(np.array(orbit.point, dtype=float)))
    dist = torus_distance(cand_pts, z)
    i = int(np.argmin(dist))
    if dist[i] >= tol:
        key = _lattice_class_key(f, np.array(orbit.point), n)
        matches = [j for j in range(len(cands))
                   if _lattice_class_key(g, cand_pts[j], n) == key]
        if len(matches) != 1:
            raise NoConvergence(
                f"lattice-class matching found {len(matches)} partners "
                f"(best direct distance {dist[i]:.3e})")
        i = matches[0]
    q, orb = cands[i]
    if orb.period != n:
        raise PeriodMismatch(
            f"period-{n} point matched a period-{orb.period} orbit")
    return q, orb


def match_periodic_points(f, g, h_fg, db_f, db_g, n, tol=1e-6):
    """Match every point of period dividing n; checked to be a bijection.

    Returns a list of (p, q, orbit_f, orbit_g) with p, q matched points.
    """
    from .hyperbolic import orbit_points
    db_f.ensure(n)
    db_g.ensure(n)
    pairs = []
    seen = []
    for d, orbits in sorted(db_f.by_period.items()):
        if n % d != 0:
            continue
        for orb in orbits:
            for p in orbit_points(f, np.array(orb.point), d):
                sub = type(orb)(point=(float(p[0]), float(p[1])), period=d,
                                lattice_class=orb.lattice_class,
                                lambda_s=orb.lambda_s, lambda_u=orb.lambda_u,
                                log_jac=orb.log_jac)
                q, orb_g = match_periodic(f, g, h_fg, sub, db_g, tol=tol)
                pairs.append((p, q, orb, orb_g))
                seen.append(q)
    seen = np.array(seen)
    total = len(db_f.points_of_period_dividing(n))
    if len(pairs) != total or len(db_g.points_of_period_dividing(n)) != total:
        raise PeriodMismatch("database point counts differ between the maps")
    d = torus_distance(seen[:, None, :], seen[None, :, :])
    np.fill_diagonal(d, 1.0)
    if d.min() < 1e-8:
        raise NoConvergence("matching is not injective: two sources share a target")
    return pairs
