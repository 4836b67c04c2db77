"""Exact lattice / plane / torus geometry.

Points on the universal cover are plain float arrays of shape (..., 2);
torus points are the same arrays canonicalized to the fundamental domain
[0,1)^2.  Lattice vectors are integer arrays.  All functions are pure and
broadcast over leading axes.
"""

from dataclasses import dataclass
import math

import numpy as np

from .errors import ComplexSpectrum, Invertible, NotHyperbolic, Reducible, SingularMatrix

EIGEN_TOL = 1e-12


def project(p):
    """Canonical torus representative of a cover point, coordinates in [0,1)."""
    return np.asarray(p, dtype=float) % 1.0


def torus_delta(p, q):
    """Minimal-image difference p - q on the torus, components in [-1/2, 1/2)."""
    d = (np.asarray(p, dtype=float) - np.asarray(q)) % 1.0
    return np.where(d >= 0.5, d - 1.0, d)


def torus_distance(p, q):
    return np.linalg.norm(torus_delta(p, q), axis=-1)


def _canonical_sign(v):
    # first nonzero coordinate positive
    if abs(v[0]) > 1e-14:
        return v if v[0] > 0 else -v
    return v if v[1] > 0 else -v


def _is_perfect_square(n: int) -> bool:
    if n < 0:
        return False
    r = math.isqrt(n)
    return r * r == n


@dataclass(frozen=True)
class LinearModel:
    """Spectral data of a hyperbolic integer matrix with real split spectrum."""

    a: np.ndarray        # 2x2 integer matrix
    lam_s: float
    lam_u: float
    e_s: np.ndarray      # unit stable eigenvector, first nonzero coord > 0
    e_u: np.ndarray
    det: int

    @property
    def basis(self):
        """Columns (e_u, e_s): coordinates v = basis @ (v_u, v_s)."""
        return np.column_stack([self.e_u, self.e_s])

    @property
    def basis_inv(self):
        return np.linalg.inv(self.basis)

    def to_eigen(self, v):
        """Eigenbasis coordinates (u-component, s-component) of vectors (...,2)."""
        return np.asarray(v) @ self.basis_inv.T

    def from_eigen(self, c):
        return np.asarray(c) @ self.basis.T


def _check_integer_matrix(m):
    m = np.asarray(m)
    mi = np.rint(m).astype(np.int64)
    if not np.allclose(m, mi, atol=0):
        raise SingularMatrix("matrix entries must be exact integers")
    if mi.shape != (2, 2):
        raise SingularMatrix("expected a 2x2 matrix")
    return mi


def eigen_split(m) -> LinearModel:
    """Split a hyperbolic integer matrix into stable/unstable spectral data.

    Raises NotHyperbolic when no eigenvalue lies strictly inside the unit
    circle (or one lies on it), ComplexSpectrum for non-real eigenvalues.
    """
    mi = _check_integer_matrix(m)
    tr = int(mi[0, 0] + mi[1, 1])
    det = int(mi[0, 0] * mi[1, 1] - mi[0, 1] * mi[1, 0])
    disc = tr * tr - 4 * det
    if disc < 0:
        raise ComplexSpectrum(f"complex eigenvalues (discriminant {disc})")
    if disc == 0:
        raise NotHyperbolic("repeated real eigenvalue: no hyperbolic splitting")
    sq = math.sqrt(disc)
    lam1 = (tr - sq) / 2.0
    lam2 = (tr + sq) / 2.0
    mods = sorted([abs(lam1), abs(lam2)])
    if min(abs(mods[0] - 1.0), abs(mods[1] - 1.0)) < EIGEN_TOL:
        raise NotHyperbolic("eigenvalue on the unit circle")
    if mods[0] > 1.0:
        raise NotHyperbolic("no stable eigenvalue (map is expanding)")
    if mods[1] < 1.0:
        raise NotHyperbolic("no unstable eigenvalue (map is contracting)")
    lam_s, lam_u = (lam1, lam2) if abs(lam1) < 1.0 else (lam2, lam1)

    def eigvec(lam):
        a, b, c, d = float(mi[0, 0]), float(mi[0, 1]), float(mi[1, 0]), float(mi[1, 1])
        # kernel of (M - lam I), from whichever row is better conditioned
        v1 = np.array([b, lam - a])
        v2 = np.array([lam - d, c])
        v = v1 if np.linalg.norm(v1) >= np.linalg.norm(v2) else v2
        v = v / np.linalg.norm(v)
        return _canonical_sign(v)

    e_s = eigvec(lam_s)
    e_u = eigvec(lam_u)
    model = LinearModel(a=mi, lam_s=lam_s, lam_u=lam_u, e_s=e_s, e_u=e_u, det=det)
    for lam, e in ((lam_s, e_s), (lam_u, e_u)):
        if np.linalg.norm(mi @ e - lam * e) > 1e-10:
            raise NotHyperbolic("eigenvector residual too large")
    return model


def validate_model(m) -> LinearModel:
    """Full admissibility check: |det| >= 2, hyperbolic, irrational spectrum."""
    mi = _check_integer_matrix(m)
    det = int(round(np.linalg.det(mi)))
    if det == 0:
        raise SingularMatrix("zero determinant")
    if abs(det) == 1:
        raise Invertible("|det| = 1: Anosov diffeomorphism, outside this class")
    tr = int(mi[0, 0] + mi[1, 1])
    disc = tr * tr - 4 * det
    # monic integer polynomial: rational roots are exactly perfect-square discriminants
    if disc >= 0 and _is_perfect_square(disc):
        raise Reducible(f"rational eigenvalues: discriminant {disc} is a perfect square")
    return eigen_split(mi)


def _congruent(mi, det, d):
    """Is integer vector d in m Z^2?  Exact: adj(m) d must vanish mod det."""
    adj = np.array([[mi[1, 1], -mi[0, 1]], [-mi[1, 0], mi[0, 0]]], dtype=object)
    w = adj @ np.asarray(d, dtype=object)
    return w[0] % det == 0 and w[1] % det == 0


def _class_key(mi, det, n):
    """Injective class invariant of n in Z^2 / mi Z^2: adj(mi) n mod det."""
    adj0 = int(mi[1, 1]) * int(n[0]) - int(mi[0, 1]) * int(n[1])
    adj1 = -int(mi[1, 0]) * int(n[0]) + int(mi[0, 0]) * int(n[1])
    return (adj0 % det, adj1 % det)


def coset_reps(m):
    """One representative per class of Z^2 / m Z^2, |det m| of them.

    Representatives are the lexicographically least non-negative vectors of
    their class; the list is sorted lexicographically (so (0,0) is first).
    """
    mi = _check_integer_matrix(m)
    det = int(mi[0, 0] * mi[1, 1] - mi[0, 1] * mi[1, 0])
    if det == 0:
        raise SingularMatrix("zero determinant")
    count = abs(det)
    reps = {}
    shell = 0
    while len(reps) < count:
        candidates = sorted((n1, n2) for n1 in range(shell + 1)
                            for n2 in range(shell + 1) if max(n1, n2) == shell)
        for cand in candidates:
            key = _class_key(mi, det, cand)
            if key not in reps:
                reps[key] = cand
                if len(reps) == count:
                    break
        shell += 1
        if shell > 4 * count + 4:
            raise SingularMatrix("coset enumeration failed to terminate")
    return sorted(reps.values())


def coset_index(mi, det, n):
    """Index of integer vector n in coset_reps(mi) ordering."""
    target = _class_key(mi, det, n)
    for i, r in enumerate(coset_reps(mi)):
        if _class_key(mi, det, r) == target:
            return i
    raise SingularMatrix("vector matched no coset (unreachable)")


def solve_integer(mi, rhs):
    """Exact integer solution x of mi @ x = rhs; raises if non-integral."""
    det = int(mi[0, 0] * mi[1, 1] - mi[0, 1] * mi[1, 0])
    adj = np.array([[mi[1, 1], -mi[0, 1]], [-mi[1, 0], mi[0, 0]]], dtype=object)
    w = adj @ np.asarray(rhs, dtype=object)
    if w[0] % det != 0 or w[1] % det != 0:
        raise SingularMatrix("right-hand side not in the column lattice")
    return np.array([w[0] // det, w[1] // det], dtype=object)


def angle_of(v):
    """Angle mod pi of a direction vector, canonical in [0, pi)."""
    th = math.atan2(float(v[1]), float(v[0])) % math.pi
    return th if th < math.pi - 1e-15 else 0.0


def angular_distance(th1, th2):
    """Distance between two line angles under the mod-pi identification."""
    d = abs(th1 - th2) % math.pi
    return min(d, math.pi - d)
