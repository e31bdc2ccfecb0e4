import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from adaptlab.systems import (
    AlgebraicIdSystem,
    Constant,
    CrmScalar,
    DimensionError,
    LinearSystem,
    ModelError,
    MracSystem,
    OrmScalar,
    PiecewiseConstant,
    SinusoidSum,
    equilibrium,
    lyapunov_value,
    rhs,
    signal_from_dict,
    sincos_identifier,
    system_from_dict,
    system_to_dict,
    vdot_bound,
)

from .test_numerics import random_hurwitz, random_spd

finite = st.floats(-50, 50)


# --- signals ----------------------------------------------------------------


def test_signal_sup_norms():
    assert Constant(-3.0).sup_norm == 3.0
    assert SinusoidSum(((2.0, 1.0, 0.0), (-0.5, 3.0, 1.0))).sup_norm == 2.5
    assert PiecewiseConstant((1.0, 2.0), (1.0, -4.0, 2.0)).sup_norm == 4.0


def test_piecewise_constant_segments():
    s = PiecewiseConstant((1.0, 2.0), (10.0, 20.0, 30.0))
    assert [s(0.5), s(1.0), s(1.5), s(2.0), s(5.0)] == [10.0, 20.0, 20.0, 30.0, 30.0]


def test_signal_round_trip():
    for s in (Constant(2.0), SinusoidSum(((1.0, 2.0, 0.3),)), PiecewiseConstant((1.0,), (0.0, 1.0))):
        assert signal_from_dict(json.loads(json.dumps(s.to_dict()))) == s
    assert signal_from_dict(4) == Constant(4.0)


def test_signal_rejects_callables_and_bad_specs():
    with pytest.raises(ModelError):
        signal_from_dict(lambda t: t)
    with pytest.raises(ModelError):
        signal_from_dict({"type": "chirp"})
    with pytest.raises(ModelError):
        PiecewiseConstant((1.0, 2.0), (1.0,))
    with pytest.raises(ModelError):
        AlgebraicIdSystem((math.sin,))


# --- rhs --------------------------------------------------------------------


def test_orm_rhs_examples(orm):
    np.testing.assert_array_equal(rhs(orm, 0.0, [0.0, 0.0]), [0.0, 0.0])
    np.testing.assert_allclose(rhs(orm, 0.0, [-2.0, -2.0]), [0.0, 2.0])


def test_crm_rhs_equilibrium(crm):
    np.testing.assert_array_equal(rhs(crm, 0.0, [3.0, 0.0, 0.0]), [0.0, 0.0, 0.0])


def test_algebraic_rhs_example():
    np.testing.assert_allclose(rhs(sincos_identifier(), math.pi / 2, [1.0, 0.0]), [-1.0, 0.0], atol=1e-15)


def test_rhs_dimension_mismatch(orm, crm):
    with pytest.raises(DimensionError):
        rhs(orm, 0.0, [1.0, 2.0, 3.0])
    with pytest.raises(DimensionError):
        rhs(crm, 0.0, [1.0, 2.0])
    with pytest.raises(DimensionError):
        lyapunov_value(orm, [1.0])


# --- equilibria and V -------------------------------------------------------


def test_equilibria(orm, crm):
    np.testing.assert_array_equal(equilibrium(orm), [0.0, 0.0])
    np.testing.assert_array_equal(equilibrium(crm), [3.0, 0.0, 0.0])
    m = MracSystem(A=-np.eye(2), B=[1.0, 1.0], Q=np.eye(2), r=Constant(1.0))
    np.testing.assert_array_equal(equilibrium(m), np.zeros(4))


def test_rhs_vanishes_at_equilibrium(orm, crm):
    m = MracSystem(A=[[0.0, 1.0], [-2.0, -3.0]], B=[0.0, 1.0], Q=np.eye(2), r=Constant(2.0))
    alg = AlgebraicIdSystem((Constant(0.0), Constant(0.0)))
    for s in (orm, crm, m, alg, LinearSystem(-np.eye(3))):
        for t in (0.0, 1.3, 17.0):
            assert np.linalg.norm(rhs(s, t, equilibrium(s))) == 0.0


def test_lyapunov_examples(crm):
    assert lyapunov_value(OrmScalar(-1.0, 1.0, 1.0, 3.0), [3.0, 4.0]) == 25.0
    assert lyapunov_value(OrmScalar(-1.0, 1.0, 4.0, 3.0), [0.0, 2.0]) == 1.0
    assert lyapunov_value(crm, [7.0, 0.0, 0.0]) == 0.0
    assert lyapunov_value(crm, [1.8, -1.2, -2.0]) == pytest.approx(5.44)


def test_vdot_examples(orm, crm):
    assert vdot_bound(orm, [2.0, 5.0]) == pytest.approx((-8.0, -8.0))
    assert vdot_bound(orm, [0.0, 123.0]) == (0.0, 0.0)
    actual, bound = vdot_bound(crm, [0.4, 1.0, -3.0])
    assert bound == -4.0
    assert actual == pytest.approx(-4.0, abs=1e-12)


@given(st.floats(-1e3, 1e3), st.floats(-1e3, 1e3), st.floats(0.1, 10.0))
def test_orm_vdot_exact(e, phi, gamma):
    # V = e^2 + phi^2/gamma cancels the cross terms exactly only for b = 1
    s = OrmScalar(-1.5, 1.0, gamma, 1.0)
    actual, bound = s.vdot(0.0, [e, phi])
    assert actual - bound == pytest.approx(0.0, abs=1e-12 * max(1.0, abs(bound), e * e * 10, abs(phi * e) * 10))


@given(finite, finite, finite, st.floats(0.1, 10.0))
def test_crm_vdot_exact(xm, e, phi, gamma):
    s = CrmScalar(-1.0, 1.0, gamma, -0.5, 2.0)
    actual, bound = s.vdot(0.0, [xm, e, phi])
    scale = max(1.0, abs(bound), abs(e * phi * (e + xm)) * 10)
    assert actual - bound == pytest.approx(0.0, abs=1e-12 * scale)


def test_mrac_vdot_bounded_by_error_term(rng):
    for k in range(20):
        n = 1 + k % 4
        m = MracSystem(
            A=random_hurwitz(rng, n), B=rng.standard_normal(n), Q=random_spd(rng, n), r=SinusoidSum(((1.0, 1.0, 0.0),))
        )
        for _ in range(50):
            z = rng.standard_normal(2 * n) * 5
            t = rng.uniform(0, 10)
            actual, bound = m.vdot(t, z)
            assert actual <= bound + 1e-9 * max(1.0, abs(bound))


def test_orm_matches_scalar_mrac(rng):
    a, b = -1.0, 1.0
    orm = OrmScalar(a, b, 1.0, 3.0)
    m = MracSystem(A=[[a]], B=[b], Q=[[2 * abs(a)]], r=Constant(3.0))
    np.testing.assert_allclose(m.P, [[1.0]])
    for z in rng.standard_normal((100, 2)) * 4:
        np.testing.assert_allclose(m.rhs(0.7, z), orm.rhs(0.7, z), rtol=1e-12, atol=1e-12)


def test_mrac_reference_state_matches_integration():
    from adaptlab.integrate import rk4

    m = MracSystem(A=[[-2.0]], B=[1.0], Q=[[1.0]], r=SinusoidSum(((1.0, 3.0, 0.2),)), xm0=[5.0])
    ref = LinearSystem(np.array([[-2.0]]))
    # x_m' = -2 x_m + sin(3t + 0.2); integrate the forced system directly
    forced = type("F", (), {"state_dim": 1, "tag": "f", "rhs": lambda self, t, z: ref.rhs(t, z) + math.sin(3 * t + 0.2)})()
    tr = rk4(forced, [5.0], 0.0, 4.0, 1e-3)
    for k in (0, 1000, 2500, 4000):
        assert m.reference_state(tr.times[k])[0] == pytest.approx(tr.states[k, 0], abs=1e-9)


def test_mrac_piecewise_reference_continuous():
    m = MracSystem(A=[[-1.0]], B=[1.0], Q=[[2.0]], r=PiecewiseConstant((1.0,), (0.0, 3.0)), xm0=[0.0])
    assert m.reference_state(1.0 - 1e-9)[0] == pytest.approx(0.0, abs=1e-8)
    assert m.reference_state(1.0 + 1e-9)[0] == pytest.approx(0.0, abs=1e-8)
    assert m.reference_state(20.0)[0] == pytest.approx(3.0, abs=1e-6)


# --- validation and serialization ---------------------------------------------


@pytest.mark.parametrize(
    "kw, field",
    [
        ({"gamma": 0.0}, "gamma"),
        ({"a": 1.0}, "a"),
        ({"b": -1.0}, "b"),
        ({"rbar": 0.0}, "rbar"),
    ],
)
def test_scalar_validation(kw, field):
    params = {"a": -1.0, "b": 1.0, "gamma": 1.0, "rbar": 3.0} | kw
    with pytest.raises(ModelError, match=field):
        OrmScalar(**params)


def test_crm_requires_negative_ell():
    with pytest.raises(ModelError, match="ell"):
        CrmScalar(-1.0, 1.0, 1.0, 0.5, 3.0)


def test_mrac_rejects_multi_input_and_unstable():
    with pytest.raises(ModelError, match="single"):
        MracSystem(A=-np.eye(2), B=np.eye(2), Q=np.eye(2), r=Constant(1.0))
    with pytest.raises(ModelError):
        MracSystem(A=np.eye(2), B=[1.0, 0.0], Q=np.eye(2), r=Constant(1.0))


def test_system_round_trip(orm, crm):
    m = MracSystem(A=[[0.0, 1.0], [-2.0, -3.0]], B=[0.0, 1.0], Q=np.eye(2), r=SinusoidSum(((1.0, 1.0, 0.0),)), theta_true=[1.0, 2.0])
    for s in (orm, crm, m, sincos_identifier(), LinearSystem(-np.eye(2))):
        d = json.loads(json.dumps(system_to_dict(s)))
        back = system_from_dict(d)
        assert back.tag == s.tag
        z = np.linspace(-1, 1, s.state_dim)
        np.testing.assert_array_equal(back.rhs(0.3, z), s.rhs(0.3, z))


def test_system_from_dict_errors():
    with pytest.raises(ModelError, match="kind"):
        system_from_dict({"a": 1})
    with pytest.raises(ModelError, match="gamma"):
        system_from_dict({"kind": "orm", "a": -1, "b": 1, "rbar": 3})
    with pytest.raises(ModelError, match="unknown"):
        system_from_dict({"kind": "pid"})
