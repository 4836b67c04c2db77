import numpy as np
import pytest

from anosovlab.errors import NotConjugatePair
from anosovlab.hyperbolic import canonical_chain
from anosovlab.regularity import (stable_derivative_estimate,
                                  unstable_derivative_estimate)

SEPS = (8e-3, 4e-3, 2e-3, 1e-3)


class _IdentityConjugacy:
    """Identity map exposing the conjugacy-object surface the estimators use."""

    def __call__(self, x):
        return np.asarray(x, dtype=float)

    def map_frac(self, frac, lattice):
        return np.asarray(frac, dtype=float) + np.asarray(lattice, dtype=float)


_identity = _IdentityConjugacy()


def test_stable_identity_map(gen1):
    rep = stable_derivative_estimate(gen1, gen1, _identity,
                                     np.array([0.27, 0.64]), separations=SEPS)
    assert rep.verdict == "Differentiable"
    assert rep.derivative == pytest.approx(1.0, abs=1e-8)
    assert rep.exponent == pytest.approx(1.0, abs=1e-6)


def test_stable_conjugated_pair_matches_analytic(gen1, g_conj, phi, h_conj):
    x = np.array([0.27, 0.64])
    rep = stable_derivative_estimate(gen1, g_conj, h_conj, x, separations=SEPS)
    assert rep.verdict == "Differentiable"
    # H = phi here, so ||DH|E^s|| is the norm of D phi applied to e_s(x)
    from anosovlab.hyperbolic import stable_direction
    es = stable_direction(gen1, x)
    expected = float(np.linalg.norm(phi.derivative(x) @ es))
    assert rep.derivative == pytest.approx(expected, rel=1e-6)


def test_unstable_identity_map(gen1):
    x = np.array([0.27, 0.64])
    chain = canonical_chain(gen1, x, 22)
    rep = unstable_derivative_estimate(gen1, gen1, _identity, x, chain,
                                       separations=SEPS)
    assert rep.verdict == "Differentiable"
    assert rep.derivative == pytest.approx(1.0, abs=1e-6)


def test_obstruction_gate():
    with pytest.raises(NotConjugatePair):
        stable_derivative_estimate(None, None, _identity, np.zeros(2),
                                   obstruction=1e-2, tol=1e-4)


def test_report_record_shape(gen1):
    rep = stable_derivative_estimate(gen1, gen1, _identity,
                                     np.array([0.5, 0.5]), separations=SEPS)
    rec = rep.record()
    assert rec["direction"] == "stable"
    assert len(rec["ratios"]) == len(SEPS)
    assert rec["verdict"] in ("Differentiable", "LipschitzOnly", "HolderOnly")
    assert "engineering choices" in rec["caveat"]
