import numpy as np
import pytest
from hypothesis import given, strategies as st

from nsf2d.errors import ConfigError, DomainError
from nsf2d.params import (
    ApproxParams,
    ModelParams,
    ScalarPreset,
    VectorPreset,
    threshold_m,
    validate_params,
)


def test_threshold_gamma4_exact():
    assert threshold_m(4.0) == 11.0 / 5.0


def test_threshold_gamma10():
    assert threshold_m(10.0) == pytest.approx(29.0 / 23.0, rel=1e-15)


def test_threshold_near_3_tends_to_4():
    # the threshold is 4 at gamma = 3 exactly and decreasing, so the
    # requirement approaches m > 4 as gamma comes down to 3
    assert threshold_m(3.0) == 4.0
    assert threshold_m(2.999) > 4.0
    for gamma in (3.0001, 3.001, 3.01):
        assert 3.9 < threshold_m(gamma) < 4.0


def test_threshold_domain_error():
    with pytest.raises(DomainError):
        threshold_m(7.0 / 3.0)
    with pytest.raises(DomainError):
        threshold_m(2.0)


@given(st.floats(min_value=3.0001, max_value=50.0), st.floats(min_value=1e-6, max_value=10.0))
def test_threshold_strictly_decreasing(g1, dg):
    assert threshold_m(g1) > threshold_m(g1 + dg)


def test_validate_default_params_pass_strict():
    rep = validate_params(ModelParams())
    assert rep.ok
    names = {c.name for c in rep.conditions}
    assert {"gamma_gt_3", "m_main", "mu_positive", "bulk_viscosity"} <= names


def test_validate_gamma4_reports_11_over_5():
    rep = validate_params(ModelParams(gamma=4.0, m=2.3, l=1.3))
    assert rep.ok
    main = next(c for c in rep.conditions if c.name == "m_main")
    assert main.threshold == 11.0 / 5.0


def test_validate_rejects_gamma_3():
    rep = validate_params(ModelParams(gamma=3.0, m=10.0, l=9.0))
    assert not rep.ok
    assert any(c.name == "gamma_gt_3" and not c.satisfied for c in rep.conditions)


def test_validate_rejects_m_below_threshold():
    rep = validate_params(ModelParams(gamma=4.0, m=2.2, l=1.2))
    assert not rep.ok
    assert any(c.name == "m_main" and not c.satisfied for c in rep.conditions)


def test_validate_rejects_nonstrict_m():
    # m exactly at the threshold is not strictly above it
    rep = validate_params(ModelParams(gamma=4.0, m=11.0 / 5.0, l=11.0 / 5.0 - 1.0))
    assert not rep.ok


def test_validate_rejects_bad_bulk_viscosity():
    rep = validate_params(ModelParams(mu=1.0, lam=-1.0))
    assert not rep.ok
    cond = next(c for c in rep.conditions if c.name == "bulk_viscosity")
    assert cond.value == pytest.approx(-1.0 / 3.0)


def test_exploratory_mode_downgrades_exponents():
    p = ModelParams(gamma=4.0, m=1.0, l=0.0)  # fails b30 badly
    assert not validate_params(p, strict=True).ok
    assert validate_params(p, strict=False).ok
    # physical conditions still enforced in exploratory mode
    assert not validate_params(ModelParams(mu=-1.0), strict=False).ok


def test_validator_is_pure():
    p = ModelParams()
    r1 = validate_params(p)
    r2 = validate_params(p)
    assert r1 == r2


def test_nonfinite_field_rejected_with_name():
    with pytest.raises(ConfigError, match="gamma"):
        validate_params(ModelParams(gamma=float("nan")))
    with pytest.raises(ConfigError, match="theta0"):
        validate_params(ModelParams(theta0=ScalarPreset("constant", value=float("inf"))))


def test_l_mismatch_noted():
    rep = validate_params(ModelParams(m=2.5, l=1.0), strict=False)
    assert any("differs from m - 1" in n for n in rep.notes)


def test_f_zero_note_and_pass():
    rep = validate_params(ModelParams(f=0.0))
    assert rep.ok
    assert any("perfect slip" in n for n in rep.notes)


@given(
    gamma=st.floats(min_value=2.5, max_value=12.0),
    m=st.floats(min_value=0.1, max_value=12.0),
    mu=st.floats(min_value=-1.0, max_value=2.0),
    lam=st.floats(min_value=-2.0, max_value=2.0),
)
def test_strict_pass_set_matches_inequalities(gamma, m, mu, lam):
    p = ModelParams(gamma=gamma, m=m, l=m - 1.0, mu=mu, lam=lam)
    rep = validate_params(p, strict=True)
    expected = (
        gamma > 3.0
        and m > (3.0 * gamma - 1.0) / (3.0 * gamma - 7.0)
        and m > 2.0 / 3.0
        and m > 2.0 * gamma / (3.0 * (gamma - 1.0))
        and m > (3.0 * gamma - 1.0) / (6.0 * gamma - 6.0)
        and mu > 0.0
        and lam + 2.0 * mu / 3.0 > 0.0
    )
    assert rep.ok == expected


def test_approx_params_h_derived_and_checked():
    ap = ApproxParams(epsilon=1e-2, k=10.0, t=0.5, M=2.0, area=4.0)
    assert ap.h == 0.5
    with pytest.raises(DomainError):
        ApproxParams(epsilon=1e-2, k=0.4, t=0.0, M=2.0, area=4.0)  # h = 0.5 >= k
    with pytest.raises(DomainError):
        ApproxParams(epsilon=0.0, k=1.0)
    with pytest.raises(DomainError):
        ApproxParams(epsilon=1e-2, k=1.0, t=1.5)


def test_presets_evaluate_and_bound():
    th = ScalarPreset("fourier1", value=1.0, amplitude=0.25, kx=1, ky=2)
    lo, hi = th.bounds()
    assert lo == 0.75 and hi == 1.25
    x = np.linspace(0, 1, 7)
    vals = th.eval(x, 0.0, 1.0, 1.0)
    assert np.all(vals >= lo - 1e-12) and np.all(vals <= hi + 1e-12)
    F = VectorPreset("gaussian_bump", fx=0.5, fy=-0.5, x0=0.3, y0=0.7, sigma=0.2)
    fx, fy = F.eval(np.array(0.3), np.array(0.7), 1.0, 1.0)
    assert fx == pytest.approx(0.5) and fy == pytest.approx(-0.5)
    with pytest.raises(ConfigError):
        ScalarPreset("polynomial")
