"""Conjugacy classification from matched periodic data.

Two certified maps with the same linear part are compared orbit by
orbit: the induced conjugacy matches periodic orbits, and the verdict
rests on the matched stable exponents (topological mode) or additionally
the periodic Jacobians (smooth mode).  A genuine exponent discrepancy
falsifies conjugacy outright; agreement across finitely many periods is
evidence for the sufficient condition, never a proof, and the caveat
string says so.
"""

from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from .conjugacy import conjugacy_between, match_periodic
from .errors import (AnosovLabError, CertificationFailure, GridTooCoarse,
                     HomotopyMismatch, TopologicalPrerequisiteFailed)
from .maps import load_spec, verify_anosov
from .orbits import OrbitDatabase

CAVEAT = ("finite-period evidence only: matched data up to the stated "
          "max_period supports, but cannot prove, conjugacy")


@dataclass
class OrbitRow:
    period: int
    p: tuple                 # representative upstairs
    q: tuple                 # matched representative downstairs
    lambda_s_f: float
    lambda_s_g: float
    d_lambda_s: float
    log_jac_f: float
    log_jac_g: float
    d_log_jac: float

    def record(self, mode):
        rec = {
            "period": self.period,
            "p": [self.p[0], self.p[1]],
            "q": [self.q[0], self.q[1]],
            "lambda_s_f": self.lambda_s_f,
            "lambda_s_g": self.lambda_s_g,
            "d_lambda_s": self.d_lambda_s,
        }
        if mode == "smooth":
            rec.update(log_jac_f=self.log_jac_f, log_jac_g=self.log_jac_g,
                       d_log_jac=self.d_log_jac)
        return rec


@dataclass
class ClassificationReport:
    mode: str                        # topological | smooth
    max_period: int
    tol: float
    rows: List[OrbitRow]
    max_discrepancy: float
    verdict: str                     # ConjugateConsistent | NotConjugate | Inconclusive
    caveat: str = CAVEAT
    meta: dict = field(default_factory=dict)

    def record(self):
        return {
            "mode": self.mode,
            "max_period": self.max_period,
            "tol": self.tol,
            "orbits": [r.record(self.mode) for r in self.rows],
            "max_discrepancy": self.max_discrepancy,
            "verdict": self.verdict,
            "caveat": self.caveat,
            **{k: v for k, v in self.meta.items() if not k.startswith("_")},
        }


def verdict_from_discrepancies(discrepancies, tol):
    """Pure verdict logic: all < tol consistent, any > 10 tol falsifies.

    The factor-10 hysteresis keeps borderline numerics in an explicit
    Inconclusive band instead of flapping between the definite verdicts.
    """
    d = [abs(v) for v in discrepancies]
    if not d:
        return "Inconclusive"
    if max(d) < tol:
        return "ConjugateConsistent"
    if max(d) > 10.0 * tol:
        return "NotConjugate"
    return "Inconclusive"


def _as_map(obj):
    if isinstance(obj, (str, bytes)) or hasattr(obj, "__fspath__"):
        return load_spec(obj)
    return obj


def _matched_rows(f, g, max_period, db_f=None, db_g=None, h_fg=None):
    if h_fg is None:
        h_fg = conjugacy_between(f, g)
    db_f = db_f if db_f is not None else OrbitDatabase(f)
    db_g = db_g if db_g is not None else OrbitDatabase(g)
    for n in range(1, max_period + 1):
        db_f.ensure(n)
        db_g.ensure(n)
    rows = []
    for orb in db_f.orbits_up_to(max_period):
        q, orb_g = match_periodic(f, g, h_fg, orb, db_g)
        rows.append(OrbitRow(
            period=orb.period,
            p=tuple(float(v) for v in orb.point),
            q=(float(q[0]), float(q[1])),
            lambda_s_f=orb.lambda_s, lambda_s_g=orb_g.lambda_s,
            d_lambda_s=abs(orb.lambda_s - orb_g.lambda_s),
            log_jac_f=orb.log_jac, log_jac_g=orb_g.log_jac,
            d_log_jac=abs(orb.log_jac - orb_g.log_jac),
        ))
    return rows, h_fg


def _precheck(f, g):
    if not np.array_equal(f.model.a, g.model.a):
        raise HomotopyMismatch(
            f"linear parts differ: {f.model.a.tolist()} vs {g.model.a.tolist()}")
    for m in (f, g):
        certify_escalating(m)


def certify_escalating(m, grids=(1.0 / 128, 1.0 / 256, 1.0 / 512)):
    """Certify hyperbolicity, refining the grid while only the Lipschitz
    slack is in the way; conjugated maps certify structurally."""
    if hasattr(m, "base") and hasattr(m, "phi"):
        return certify_conjugated(m)
    last = None
    for gs in grids:
        try:
            return verify_anosov(m, grid_step=gs)
        except GridTooCoarse as exc:
            last = exc
        except AnosovLabError as exc:
            raise CertificationFailure(
                f"map '{m.name}' failed hyperbolicity certification: {exc}"
            ) from exc
    raise CertificationFailure(
        f"map '{m.name}' failed hyperbolicity certification: {last}") from last


def certify_conjugated(m, grid_n=128):
    """Certificate for g = phi o f o phi^{-1} from a certificate of f.

    A smooth conjugacy preserves uniform hyperbolicity outright; the
    one-step rates degrade by at most the worst condition number of
    D phi squared, a one-time constant, so the certificate is emitted at
    the smallest iterate at which the degraded rates clear 1.
    """
    from dataclasses import replace
    base_cert = certify_escalating(m.base)
    grid = (np.arange(grid_n) + 0.5) / grid_n
    xx, yy = np.meshgrid(grid, grid)
    pts = np.stack([xx.ravel(), yy.ravel()], axis=-1)
    kappa = float(np.max(np.linalg.cond(m.phi.derivative(pts)))) * 1.05
    k2 = kappa * kappa
    for steps in range(1, 64):
        exp_lb = base_cert.expansion_lb ** steps / k2
        cont_ub = base_cert.contraction_ub ** steps * k2
        if exp_lb > 1.0 and cont_ub < 1.0:
            return replace(base_cert, expansion_lb=exp_lb,
                           contraction_ub=cont_ub, steps=steps)
    raise CertificationFailure(
        f"map '{m.name}': conjugating frame condition number {kappa:.3g} "
        "too large to transport the base certificate")


def classify_topological(f, g, max_period=5, tol=1e-6, rows=None, h_fg=None):
    """Compare matched stable periodic exponents up to max_period."""
    f, g = _as_map(f), _as_map(g)
    _precheck(f, g)
    if rows is None:
        rows, h_fg = _matched_rows(f, g, max_period, h_fg=h_fg)
    discs = [r.d_lambda_s for r in rows]
    rep = ClassificationReport(
        mode="topological", max_period=max_period, tol=tol, rows=rows,
        max_discrepancy=max(discs, default=0.0),
        verdict=verdict_from_discrepancies(discs, tol))
    rep.meta["f"] = f.name
    rep.meta["g"] = g.name
    rep.meta["_h_fg"] = h_fg
    return rep


def classify_smooth(f, g, max_period=5, tol=1e-6):
    """Additionally compare periodic Jacobians; needs the topological pass."""
    f, g = _as_map(f), _as_map(g)
    topo = classify_topological(f, g, max_period=max_period, tol=tol)
    if topo.verdict != "ConjugateConsistent":
        raise TopologicalPrerequisiteFailed(
            f"topological verdict is {topo.verdict}; "
            "smooth comparison needs ConjugateConsistent stable data")
    discs = [r.d_lambda_s for r in topo.rows] + [r.d_log_jac for r in topo.rows]
    rep = ClassificationReport(
        mode="smooth", max_period=max_period, tol=tol, rows=topo.rows,
        max_discrepancy=max((r.d_log_jac for r in topo.rows), default=0.0),
        verdict=verdict_from_discrepancies(discs, tol))
    rep.meta["f"] = f.name
    rep.meta["g"] = g.name
    rep.meta["topological_max_discrepancy"] = topo.max_discrepancy
    return rep
