import json

import numpy as np
import pytest

import anosovlab as al
from anosovlab.errors import AnosovLabError, SpecFileError
from anosovlab.maps import (ConjugatedMap, TrigDiffeo, spec_from_dict,
                            verify_anosov)
from anosovlab.torus import project, torus_distance

A3 = [[3, 1], [1, 1]]


def _fd_jacobian(fn, x, h=1e-6):
    cols = []
    for j in range(2):
        e = np.zeros(2)
        e[j] = h
        cols.append((fn(x + e) - fn(x - e)) / (2.0 * h))
    return np.stack(cols, axis=-1)


def test_spec_from_dict_validation():
    good = {"name": "m", "linear": A3,
            "perturbation": [{"k": [1, 0], "amp": [0.01, 0.0], "phase": 0.3}]}
    spec = spec_from_dict(good)
    assert spec.name == "m" and len(spec.terms) == 1

    with pytest.raises(SpecFileError, match="unknown map-spec field"):
        spec_from_dict({**good, "perturbaton": []})
    with pytest.raises(SpecFileError, match="'linear'"):
        spec_from_dict({"name": "m", "linear": [[3, 1], [1]]})
    with pytest.raises(SpecFileError, match="integers"):
        spec_from_dict({"name": "m", "linear": [[3.0, 1], [1, 1]]})
    with pytest.raises(SpecFileError, match=r"perturbation\[0\]"):
        spec_from_dict({"name": "m", "linear": A3,
                        "perturbation": [{"k": [1, 0]}]})
    with pytest.raises(SpecFileError, match="amp"):
        spec_from_dict({"name": "m", "linear": A3,
                        "perturbation": [{"k": [1, 0], "amp": [0.1]}]})


def test_save_load_roundtrip(gen1, tmp_path):
    path = tmp_path / "spec.json"
    al.save_spec(gen1, path)
    back = al.load_spec(path)
    assert back.name == gen1.name
    pts = np.random.default_rng(2).random((20, 2))
    assert np.allclose(back.eval_lift(pts), gen1.eval_lift(pts), atol=0.0)


def test_load_spec_reports_path_and_field(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text(json.dumps({"name": "x", "linear": A3, "extra": 1}))
    with pytest.raises(SpecFileError, match="bad.json"):
        al.load_spec(path)


def test_lift_equivariance(gen1):
    rng = np.random.default_rng(3)
    x = rng.random((30, 2))
    n = rng.integers(-3, 4, size=(30, 2)).astype(float)
    lhs = gen1.eval_lift(x + n)
    rhs = gen1.eval_lift(x) + n @ gen1.model.a.astype(float).T
    assert np.max(np.abs(lhs - rhs)) < 1e-12


def test_preimages_complete(gen1):
    rng = np.random.default_rng(4)
    for t in rng.random((5, 2)):
        pres = gen1.preimages(t)
        assert len(pres) == gen1.degree == 2
        for p in pres:
            assert torus_distance(gen1.eval_torus(p), project(t)) < 1e-11
        assert torus_distance(pres[0], pres[1]) > 1e-3


def test_derivative_matches_finite_difference(gen1):
    rng = np.random.default_rng(5)
    for x in rng.random((5, 2)):
        d = gen1.derivative(x)
        fd = _fd_jacobian(gen1.eval_lift, x)
        assert np.max(np.abs(d - fd)) < 1e-8


def test_conjugated_map_evaluates_conjugation(gen1, phi, g_conj):
    rng = np.random.default_rng(6)
    for x in rng.random((5, 2)):
        expected = phi(gen1.eval_lift(phi.inverse(x)))
        assert np.max(np.abs(g_conj.eval_lift(x) - expected)) < 1e-11
        fd = _fd_jacobian(g_conj.eval_lift, x)
        assert np.max(np.abs(g_conj.derivative(x) - fd)) < 1e-7


def test_trig_diffeo_inverse(phi):
    rng = np.random.default_rng(7)
    x = rng.random((40, 2))
    assert np.max(np.abs(phi.inverse(phi(x)) - x)) < 1e-12


def test_verify_anosov_linear_exact_rates(linear):
    cert = verify_anosov(linear)
    lam_u = abs(linear.model.lam_u)
    lam_s = abs(linear.model.lam_s)
    assert cert.expansion_lb == pytest.approx(lam_u, rel=1e-9)
    assert cert.contraction_ub == pytest.approx(lam_s, rel=1e-9)
    assert cert.steps == 1
    assert cert.lipschitz_slack == 0.0


def test_verify_anosov_certifies_perturbed(gen1):
    from anosovlab.classify import certify_escalating
    cert = certify_escalating(gen1)
    assert cert.expansion_lb > 1.0
    assert cert.contraction_ub < 1.0


def test_verify_anosov_rejects_violent_perturbation():
    bad = spec_from_dict({
        "name": "too_big", "linear": A3,
        "perturbation": [{"k": [1, 0], "amp": [0.5, 0.0], "phase": 0.0}]})
    with pytest.raises(AnosovLabError):
        verify_anosov(bad, grid_step=1.0 / 64)
