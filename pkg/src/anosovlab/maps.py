"""Perturbed torus endomorphisms f(x) = A x + P(x).

Two concrete map classes share the ``TorusMap`` interface:

* ``TrigMap`` -- A plus a finite trigonometric perturbation (the on-disk
  spec format).
* ``ConjugatedMap`` -- phi o f o phi^{-1} for a trigonometric
  diffeomorphism phi homotopic to the identity; used to build exactly
  conjugate test pairs.

All evaluators broadcast over leading axes: points are arrays (..., 2).
"""

import hashlib
import json
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    GridTooCoarse,
    NewtonDivergence,
    NotAnosov,
    SpecFileError,
)
from .torus import LinearModel, coset_reps, project, validate_model

TWO_PI = 2.0 * np.pi


@dataclass(frozen=True)
class PerturbationTerm:
    k: tuple          # integer frequency vector
    amp: tuple        # real 2-vector
    phase: float = 0.0


class TorusMap:
    """Common machinery for maps of the form F(x) = A x + P(x), P periodic."""

    name: str
    model: LinearModel

    # -- subclass surface -------------------------------------------------
    def perturbation(self, x):
        raise NotImplementedError

    def perturbation_derivative(self, x):
        raise NotImplementedError

    def dmap_lipschitz(self):
        """Upper bound for the Lipschitz constant of x -> DF(x)."""
        raise NotImplementedError

    # -- shared evaluators ------------------------------------------------
    @property
    def degree(self):
        return abs(self.model.det)

    def eval_lift(self, x):
        x = np.asarray(x, dtype=float)
        return x @ self.model.a.T.astype(float) + self.perturbation(x)

    def derivative(self, x):
        x = np.asarray(x, dtype=float)
        dp = self.perturbation_derivative(x)
        return self.model.a.astype(float) + dp

    def eval_torus(self, t):
        return project(self.eval_lift(project(t)))

    def iterate_torus(self, t, n):
        t = project(t)
        for _ in range(n):
            t = self.eval_torus(t)
        return t

    def perturbation_sup(self):
        """Sup-norm bound for P; analytic where possible, sampled otherwise."""
        grid = np.linspace(0.0, 1.0, 257)[:-1]
        xx, yy = np.meshgrid(grid, grid)
        pts = np.stack([xx.ravel(), yy.ravel()], axis=-1)
        vals = np.linalg.norm(self.perturbation(pts), axis=-1)
        return float(vals.max()) * 1.05

    def perturbation_sup_eigen(self):
        """(sup |P_u|, sup |P_s|) over the torus, eigenbasis components."""
        grid = np.linspace(0.0, 1.0, 257)[:-1]
        xx, yy = np.meshgrid(grid, grid)
        pts = np.stack([xx.ravel(), yy.ravel()], axis=-1)
        comps = self.model.to_eigen(self.perturbation(pts))
        return (float(np.abs(comps[:, 0]).max()) * 1.05 + 1e-300,
                float(np.abs(comps[:, 1]).max()) * 1.05 + 1e-300)

    def invert_lift(self, y, tol=1e-13, max_iter=60):
        """Global inverse of the lift by damped Newton, seeded at A^{-1} y."""
        y = np.asarray(y, dtype=float)
        a_inv = np.linalg.inv(self.model.a.astype(float))
        x = y @ a_inv.T
        trace = []
        res = self.eval_lift(x) - y
        rnorm = np.linalg.norm(res, axis=-1)
        for _ in range(max_iter):
            if np.all(rnorm < tol):
                return x
            trace.append(float(np.max(rnorm)))
            dfx = self.derivative(x)
            step = np.linalg.solve(dfx, res[..., None])[..., 0]
            lam = 1.0
            for _ in range(30):
                x_new = x - lam * step
                res_new = self.eval_lift(x_new) - y
                rn = np.linalg.norm(res_new, axis=-1)
                if np.all(rn <= rnorm * (1.0 - 0.25 * lam) + tol):
                    break
                lam *= 0.5
            else:
                raise NewtonDivergence("invert_lift: line search stalled", trace=trace)
            x, res, rnorm = x_new, res_new, rn
        if np.all(rnorm < tol):
            return x
        raise NewtonDivergence("invert_lift: no convergence", trace=trace)

    def preimages(self, t, tol=1e-13):
        """All |det A| torus preimages of t, ordered by coset representative.

        Branch 0 is the lift-induced branch pi(F^{-1}(t_hat)) for the
        canonical representative t_hat in [0,1)^2.
        """
        t = project(np.asarray(t, dtype=float))
        reps = coset_reps(self.model.a)
        targets = np.stack([t + np.array(r, dtype=float) for r in reps])
        return project(self.invert_lift(targets, tol=tol))

    def spec_hash(self):
        return hashlib.sha256(
            json.dumps(self.describe(), sort_keys=True).encode()
        ).hexdigest()[:16]

    def describe(self):
        raise NotImplementedError


class TrigMap(TorusMap):
    """Linear model plus finite trigonometric perturbation (the MapSpec class)."""

    def __init__(self, name, linear, terms=()):
        self.name = name
        self.model = linear if isinstance(linear, LinearModel) else validate_model(linear)
        self.terms = tuple(
            t if isinstance(t, PerturbationTerm) else PerturbationTerm(
                k=tuple(int(v) for v in t["k"]),
                amp=tuple(float(v) for v in t["amp"]),
                phase=float(t.get("phase", 0.0)),
            )
            for t in terms
        )
        self._k = np.array([t.k for t in self.terms], dtype=float).reshape(-1, 2)
        self._amp = np.array([t.amp for t in self.terms], dtype=float).reshape(-1, 2)
        self._phase = np.array([t.phase for t in self.terms], dtype=float)

    def perturbation(self, x):
        x = np.asarray(x, dtype=float)
        if not self.terms:
            return np.zeros_like(x)
        arg = TWO_PI * (x @ self._k.T) + self._phase          # (..., nterms)
        return np.sin(arg) @ self._amp                        # (..., 2)

    def perturbation_derivative(self, x):
        x = np.asarray(x, dtype=float)
        out = np.zeros(x.shape[:-1] + (2, 2))
        if not self.terms:
            return out
        arg = TWO_PI * (x @ self._k.T) + self._phase
        cos = np.cos(arg)                                     # (..., nterms)
        # d/dx_j of amp_i sin(2 pi k.x + phase) = amp_i 2 pi k_j cos(...)
        return TWO_PI * np.einsum("...t,ti,tj->...ij", cos, self._amp, self._k)

    def perturbation_sup(self):
        if not self.terms:
            return 0.0
        return float(np.sum(np.linalg.norm(self._amp, axis=1)))

    def perturbation_sup_eigen(self):
        if not self.terms:
            return (0.0, 0.0)
        comps = np.abs(self.model.to_eigen(self._amp))
        return (float(comps[:, 0].sum()) + 1e-300, float(comps[:, 1].sum()) + 1e-300)

    def dmap_lipschitz(self):
        if not self.terms:
            return 0.0
        knorm2 = np.sum(self._k ** 2, axis=1)
        ampnorm = np.linalg.norm(self._amp, axis=1)
        return float(TWO_PI ** 2 * np.sum(knorm2 * ampnorm))

    def describe(self):
        return {
            "name": self.name,
            "linear": [[int(v) for v in row] for row in self.model.a],
            "perturbation": [
                {"k": list(t.k), "amp": list(t.amp), "phase": t.phase}
                for t in self.terms
            ],
        }


class TrigDiffeo:
    """phi = Id + trigonometric displacement, a diffeomorphism for small terms."""

    def __init__(self, terms):
        self.terms = tuple(
            t if isinstance(t, PerturbationTerm) else PerturbationTerm(*t)
            for t in terms
        )
        self._k = np.array([t.k for t in self.terms], dtype=float).reshape(-1, 2)
        self._amp = np.array([t.amp for t in self.terms], dtype=float).reshape(-1, 2)
        self._phase = np.array([t.phase for t in self.terms], dtype=float)

    def displacement(self, x):
        x = np.asarray(x, dtype=float)
        if not self.terms:
            return np.zeros_like(x)
        arg = TWO_PI * (x @ self._k.T) + self._phase
        return np.sin(arg) @ self._amp

    def __call__(self, x):
        return np.asarray(x, dtype=float) + self.displacement(x)

    def derivative(self, x):
        x = np.asarray(x, dtype=float)
        eye = np.broadcast_to(np.eye(2), x.shape[:-1] + (2, 2)).copy()
        if not self.terms:
            return eye
        arg = TWO_PI * (x @ self._k.T) + self._phase
        cos = np.cos(arg)
        return eye + TWO_PI * np.einsum("...t,ti,tj->...ij", cos, self._amp, self._k)

    def inverse(self, y, tol=1e-14, max_iter=80):
        y = np.asarray(y, dtype=float)
        x = y.copy()
        for _ in range(max_iter):
            res = self(x) - y
            if np.max(np.linalg.norm(res, axis=-1)) < tol:
                return x
            step = np.linalg.solve(self.derivative(x), res[..., None])[..., 0]
            x = x - step
        raise NewtonDivergence("TrigDiffeo.inverse: no convergence")


class ConjugatedMap(TorusMap):
    """g = phi o f o phi^{-1}; same linear part as f, exactly conjugate to it."""

    def __init__(self, name, base, phi):
        self.name = name
        self.base = base
        self.phi = phi
        self.model = base.model

    def eval_lift(self, x):
        x = np.asarray(x, dtype=float)
        return self.phi(self.base.eval_lift(self.phi.inverse(x)))

    def perturbation(self, x):
        x = np.asarray(x, dtype=float)
        return self.eval_lift(x) - x @ self.model.a.T.astype(float)

    def derivative(self, x):
        x = np.asarray(x, dtype=float)
        z = self.phi.inverse(x)
        fz = self.base.eval_lift(z)
        dphi_inv = np.linalg.inv(self.phi.derivative(z))
        return self.phi.derivative(fz) @ self.base.derivative(z) @ dphi_inv

    def perturbation_derivative(self, x):
        return self.derivative(x) - self.model.a.astype(float)

    def dmap_lipschitz(self):
        # no closed form through the composition: sampled with a safety factor
        grid = np.linspace(0.0, 1.0, 65)[:-1]
        xx, yy = np.meshgrid(grid, grid)
        pts = np.stack([xx.ravel(), yy.ravel()], axis=-1)
        h = 1e-5
        lip = 0.0
        d0 = self.derivative(pts)
        for i in range(2):
            dp = self.derivative(pts + h * np.eye(2)[i])
            lip = max(lip, float(np.max(np.linalg.norm(dp - d0, axis=(-2, -1)))) / h)
        return lip * 1.5

    def describe(self):
        return {
            "name": self.name,
            "base": self.base.describe(),
            "phi": [
                {"k": list(t.k), "amp": list(t.amp), "phase": t.phase}
                for t in self.phi.terms
            ],
        }


# ---------------------------------------------------------------------------
# spec files

_SPEC_KEYS = {"name", "linear", "perturbation"}
_TERM_KEYS = {"k", "amp", "phase"}


def spec_from_dict(data):
    if not isinstance(data, dict):
        raise SpecFileError("map spec must be a JSON object")
    unknown = set(data) - _SPEC_KEYS
    if unknown:
        raise SpecFileError(f"unknown map-spec field(s): {sorted(unknown)}")
    for key in ("name", "linear"):
        if key not in data:
            raise SpecFileError(f"map spec missing required field '{key}'")
    if not isinstance(data["name"], str):
        raise SpecFileError("field 'name' must be a string")
    linear = data["linear"]
    if (not isinstance(linear, list) or len(linear) != 2
            or any(not isinstance(r, list) or len(r) != 2 for r in linear)):
        raise SpecFileError("field 'linear' must be a 2x2 integer matrix")
    for row in linear:
        for v in row:
            if not isinstance(v, int):
                raise SpecFileError("field 'linear' must contain integers only")
    terms = data.get("perturbation", [])
    if not isinstance(terms, list):
        raise SpecFileError("field 'perturbation' must be a list")
    parsed = []
    for i, t in enumerate(terms):
        if not isinstance(t, dict):
            raise SpecFileError(f"perturbation[{i}] must be an object")
        unknown = set(t) - _TERM_KEYS
        if unknown:
            raise SpecFileError(f"perturbation[{i}]: unknown field(s) {sorted(unknown)}")
        if "k" not in t or "amp" not in t:
            raise SpecFileError(f"perturbation[{i}] needs fields 'k' and 'amp'")
        k = t["k"]
        if (not isinstance(k, list) or len(k) != 2
                or any(not isinstance(v, int) for v in k)):
            raise SpecFileError(f"perturbation[{i}].k must be two integers")
        amp = t["amp"]
        if (not isinstance(amp, list) or len(amp) != 2
                or any(not isinstance(v, (int, float)) for v in amp)):
            raise SpecFileError(f"perturbation[{i}].amp must be two numbers")
        if "phase" in t and not isinstance(t["phase"], (int, float)):
            raise SpecFileError(f"perturbation[{i}].phase must be a number")
        parsed.append(t)
    return TrigMap(data["name"], linear, parsed)


def load_spec(path):
    try:
        with open(path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
    except json.JSONDecodeError as exc:
        raise SpecFileError(f"{path}: invalid JSON at line {exc.lineno}: {exc.msg}") from exc
    except OSError as exc:
        raise SpecFileError(f"{path}: {exc}") from exc
    try:
        return spec_from_dict(data)
    except SpecFileError as exc:
        raise SpecFileError(f"{path}: {exc}") from exc


def save_spec(spec, path):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(spec.describe(), fh, indent=2)
        fh.write("\n")


# ---------------------------------------------------------------------------
# Anosov certification

@dataclass(frozen=True)
class AnosovCertificate:
    cone_aperture_s: float
    cone_aperture_u: float
    expansion_lb: float
    contraction_ub: float
    grid_step: float
    lipschitz_slack: float
    containment_margin_u: float = field(default=0.0)
    containment_margin_s: float = field(default=0.0)
    steps: int = field(default=1)


def verify_anosov(spec, grid_step=1.0 / 128, cone_tau=1.0, steps=1):
    """Certify uniform hyperbolicity by a grid check with Lipschitz slack.

    Cones are defined in the eigenbasis of A by |off-component| <=
    cone_tau * |axis component|; expansion/contraction is measured on the
    axis component (the quotient-bundle rates), so the linear model
    certifies at exactly (|lam_u|, |lam_s|).

    With steps > 1 the cone conditions are checked for the composed
    derivative Df^steps: maps whose expansion is uniform only in an
    adapted metric (e.g. smooth conjugates of certified maps) certify at
    a small power, which is equivalent to hyperbolicity of the map itself.
    """
    model = spec.model
    n = max(4, int(round(1.0 / grid_step)))
    grid = np.arange(n) / n
    xx, yy = np.meshgrid(grid, grid)
    pts = np.stack([xx.ravel(), yy.ravel()], axis=-1)

    c = model.basis
    c_inv = model.basis_inv
    d_acc = spec.derivative(pts)
    sup_d = float(np.max(np.linalg.norm(d_acc, axis=(-2, -1))))
    t = pts
    for _ in range(steps - 1):
        t = spec.eval_torus(t)
        dt = spec.derivative(t)
        sup_d = max(sup_d, float(np.max(np.linalg.norm(dt, axis=(-2, -1)))))
        d_acc = dt @ d_acc
    m_hat = np.einsum("ij,...jk,kl->...il", c_inv, d_acc, c)

    m11 = m_hat[:, 0, 0]
    m12 = m_hat[:, 0, 1]
    m21 = m_hat[:, 1, 0]
    m22 = m_hat[:, 1, 1]

    tau = cone_tau
    # unstable cone: boundary rays (1, +-tau)
    exp_pt = np.abs(m11) - tau * np.abs(m12)
    num_u = np.abs(m21[:, None] + np.array([1.0, -1.0]) * tau * m22[:, None]).max(axis=1)
    den_u = np.abs(m11[:, None] + np.array([1.0, -1.0]) * tau * m12[:, None]).min(axis=1)
    cont_margin_u = tau * den_u - num_u

    n_hat = np.linalg.inv(m_hat)
    n11 = n_hat[:, 0, 0]
    n12 = n_hat[:, 0, 1]
    n21 = n_hat[:, 1, 0]
    n22 = n_hat[:, 1, 1]
    backexp_pt = np.abs(n22) - tau * np.abs(n21)
    num_s = np.abs(n12[:, None] + np.array([1.0, -1.0]) * tau * n11[:, None]).max(axis=1)
    den_s = np.abs(n22[:, None] + np.array([1.0, -1.0]) * tau * n21[:, None]).min(axis=1)
    cont_margin_s = tau * den_s - num_s

    def witness(idx, what):
        return NotAnosov(f"{what} fails at grid point {tuple(pts[idx])}",
                         witness=tuple(pts[idx]))

    i = int(np.argmin(exp_pt))
    if exp_pt[i] <= 1.0:
        raise witness(i, "unstable-cone expansion")
    i = int(np.argmin(cont_margin_u))
    if cont_margin_u[i] <= 0.0:
        raise witness(i, "unstable-cone invariance")
    i = int(np.argmin(backexp_pt))
    if backexp_pt[i] <= 1.0:
        raise witness(i, "stable-cone backward expansion")
    i = int(np.argmin(cont_margin_s))
    if cont_margin_s[i] <= 0.0:
        raise witness(i, "stable-cone invariance")

    # Lipschitz slack: DF moves by at most L * (grid diagonal / 2) off-grid
    lip = spec.dmap_lipschitz()
    if steps > 1:
        # chain rule: Lip(Df^m) <= L M^{m-1} (M^m - 1)/(M - 1), M >= sup||Df||
        m_sup = sup_d + lip * (1.0 / n) * np.sqrt(2.0) / 2.0
        lip = lip * m_sup ** (steps - 1) * (m_sup ** steps - 1.0) / (m_sup - 1.0)
    kappa = np.linalg.cond(c)
    delta = kappa * lip * (1.0 / n) * np.sqrt(2.0) / 2.0
    slack = delta * (1.0 + tau)
    ninf = float(np.max(np.linalg.norm(n_hat, axis=(-2, -1))))
    slack_inv = delta * ninf ** 2 * (1.0 + tau)

    expansion_lb = float(np.min(exp_pt)) - slack
    backexp_lb = float(np.min(backexp_pt)) - slack_inv
    margin_u = float(np.min(cont_margin_u)) - slack * (1.0 + tau)
    margin_s = float(np.min(cont_margin_s)) - slack_inv * (1.0 + tau)

    if expansion_lb <= 1.0 or backexp_lb <= 1.0 or margin_u <= 0.0 or margin_s <= 0.0:
        raise GridTooCoarse(
            f"grid check passes but Lipschitz slack {slack:.3e} exceeds margins; "
            f"refine below grid_step={grid_step}")

    aperture = float(np.arctan(tau))
    return AnosovCertificate(
        cone_aperture_s=aperture,
        cone_aperture_u=aperture,
        expansion_lb=expansion_lb,
        contraction_ub=1.0 / backexp_lb,
        grid_step=1.0 / n,
        lipschitz_slack=slack,
        containment_margin_u=margin_u,
        containment_margin_s=margin_s,
        steps=steps,
    )
