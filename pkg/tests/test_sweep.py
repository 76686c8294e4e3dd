import math

import pytest

from fuyau_flow import sweep
from fuyau_flow.flow import FlowConfig, MuMode, RhoMode
from fuyau_flow.geometry import GeometryReport
from fuyau_flow.runner import CONVERGED, ELLIPTICITY_LOSS
from fuyau_flow.sweep import RunSummary, _growth, fit_exponent, m_sweep


def test_fit_exponent_on_exact_power_law():
    M = [1e2, 1e3, 1e4]
    fit = fit_exponent(M, [3.0 / m**1.5 for m in M], predicted=-1.0)
    assert fit.slope == pytest.approx(-1.5)
    assert fit.confirms_bound and not fit.inconclusive
    slow = fit_exponent(M, [3.0 / m**0.5 for m in M], predicted=-1.0)
    assert not slow.confirms_bound


def test_fit_exponent_edge_cases():
    assert fit_exponent([1, 10, 100], [0, 0, 0], -1.0).confirms_bound
    assert fit_exponent([1, 10, 100], [1, 0, 2], -1.0).inconclusive
    noisy = fit_exponent([1, 10, 100, 1000], [1.0, 0.01, 1.0, 0.01], -1.0)
    assert noisy.inconclusive and not noisy.confirms_bound


def test_growth():
    assert _growth([4.0, 2.0, 1.0]) == 1.0
    assert _growth([1.0, 3.0, 2.0]) == 3.0
    assert _growth([0.0, 0.0]) == 1.0
    assert _growth([0.0, 1.0]) == math.inf


def test_sweep_needs_three_values():
    with pytest.raises(ValueError):
        m_sweep(FlowConfig(n=8), [1e2, 1e3])


def test_alpha_zero_sweep_has_zero_torsion():
    base = FlowConfig(n=8, alpha_prime=0.0, rho_modes=[RhoMode(1, 1, (0, 0, 1, 0), 0.5)])
    res = m_sweep(base, [1e2, 1e3, 1e4])
    assert all(r.converged and r.sup_T2 == 0.0 for r in res.runs)
    assert res.torsion_exponent.slope == -math.inf
    assert res.empirical_M0 == 1e2
    assert res.bounds_confirmed()


def _fake(M, reason, T2=0.0):
    g = GeometryReport(M, M, T2, 0.0, 1.0, 1.0, M, 0.0, 0.0)
    return RunSummary(M, reason, None, T2, 0.0, g.sup_e_u, g.inf_e_u, None, 0.0)


def test_threshold_and_inconclusive(monkeypatch):
    outcome = {1e1: ELLIPTICITY_LOSS, 1e2: ELLIPTICITY_LOSS, 1e3: CONVERGED}
    monkeypatch.setattr(sweep, "_summarize", lambda M, cfg: _fake(M, outcome[M], 1.0 / M**2))
    res = m_sweep(FlowConfig(n=8), [1e3, 1e1, 1e2])
    assert res.M_values == [1e1, 1e2, 1e3]
    assert res.inconclusive and not res.bounds_confirmed()
    assert res.empirical_M0 == 1e3

    outcome[1e2] = CONVERGED
    res = m_sweep(FlowConfig(n=8), [1e1, 1e2, 1e3])
    assert res.empirical_M0 == 1e2 and not res.inconclusive
    assert res.torsion_exponent.slope == pytest.approx(-2.0)
    assert res.bounds_confirmed()
    assert res.as_dict()["empirical_M0"] == 1e2


def test_small_real_sweep_confirms_bounds():
    base = FlowConfig(
        n=12, alpha_prime=1.0, dt=1.0, t_max=400.0, record_every=5,
        rho_modes=[RhoMode(1, 1, (0, 0, 1, 0), 0.5)], mu_modes=[MuMode((1, 0, 0, 0), 1.0)],
    )
    res = m_sweep(base, [2e2, 1e3, 5e3])
    assert [r.reason for r in res.runs] == [CONVERGED] * 3
    assert res.torsion_exponent.confirms_bound and res.ricci_exponent.confirms_bound
    assert res.bounds_confirmed()
    assert all(r.decay is not None and r.decay.eta > 0 for r in res.runs)
