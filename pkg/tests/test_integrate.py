import math

import numpy as np
import pytest

from adaptlab.integrate import (
    IntegrationDiverged,
    TagMismatch,
    Trajectory,
    decay_rate_scan,
    is_nonincreasing,
    lyapunov_series,
    rk4,
    rk4_batch,
    settling_time,
)
from adaptlab.numerics import sym_eig_bounds, trapezoid_integral
from adaptlab.systems import (
    Constant,
    DimensionError,
    LinearSystem,
    MracSystem,
    OrmScalar,
    SinusoidSum,
    sincos_identifier,
)

DECAY = LinearSystem(np.array([[-1.0]]))


def test_rk4_exponential():
    tr = rk4(DECAY, [1.0], 0.0, 1.0, 1e-3)
    assert tr.times[-1] == pytest.approx(1.0, abs=1e-12)
    assert tr.states[-1, 0] == pytest.approx(math.exp(-1.0), abs=1e-10)
    np.testing.assert_allclose(np.diff(tr.times), 1e-3, atol=1e-12)


def test_rk4_equilibrium_stays_put(orm):
    tr = rk4(orm, [0.0, 0.0], 0.0, 5.0, 1e-3)
    assert np.all(tr.states == 0.0)


def test_derivs_are_rhs_at_samples(orm):
    tr = rk4(orm, [-2.0, -2.0], 0.0, 1.0, 1e-2)
    for k in (0, 37, len(tr) - 1):
        np.testing.assert_array_equal(tr.derivs[k], orm.rhs(tr.times[k], tr.states[k]))


def test_step_halving_self_oracle(orm):
    a = rk4(orm, [-2.0, -2.0], 0.0, 10.0, 1e-3).states[-1]
    b = rk4(orm, [-2.0, -2.0], 0.0, 10.0, 5e-4).states[-1]
    assert np.linalg.norm(a - b) <= 1e-9


def test_fourth_order_convergence(orm):
    z0, tf = [-2.0, -2.0], 5.0
    ref = rk4(orm, z0, 0.0, tf, 1.25e-4).states[-1]
    errs = [np.linalg.norm(rk4(orm, z0, 0.0, tf, h).states[-1] - ref) for h in (1e-2, 5e-3)]
    assert errs[0] / errs[1] >= 14.0


def test_batch_matches_single(orm):
    z0s = [[-2.0, -2.0], [-2.4, -4.0], [0.5, 0.5]]
    batch = rk4_batch(orm, z0s, 0.0, 3.0, 1e-3)
    for z0, tr in zip(z0s, batch):
        single = rk4(orm, z0, 0.0, 3.0, 1e-3)
        np.testing.assert_array_equal(tr.states, single.states)
        np.testing.assert_array_equal(tr.derivs, single.derivs)


def test_rk4_argument_checks(orm):
    with pytest.raises(ValueError):
        rk4(orm, [0.0, 0.0], 0.0, 1.0, 0.0)
    with pytest.raises(ValueError):
        rk4(orm, [0.0, 0.0], 1.0, 0.0, 1e-3)
    with pytest.raises(ValueError):
        rk4(orm, [0.0, 0.0], 0.0, 1e9, 1e-3)
    with pytest.raises(DimensionError):
        rk4(orm, [0.0], 0.0, 1.0, 1e-3)


def test_divergence_reports_time():
    blowup = LinearSystem(np.array([[1000.0]]))
    with pytest.raises(IntegrationDiverged) as info:
        rk4(blowup, [1.0], 0.0, 10.0, 0.1)
    assert 0.0 < info.value.t <= 10.0


def test_csv_round_trip(tmp_path, orm):
    tr = rk4(orm, [-2.0, -2.0], 0.0, 1.0, 1e-2)
    path = tr.to_csv(tmp_path / "t.csv")
    assert path.read_text().splitlines()[0] == "t,z1,z2,dz1,dz2"
    back = Trajectory.from_csv(path)
    np.testing.assert_array_equal(back.times, tr.times)
    np.testing.assert_array_equal(back.states, tr.states)
    np.testing.assert_array_equal(back.derivs, tr.derivs)


# --- settling -----------------------------------------------------------------


def test_settling_constant_trajectory(orm):
    tr = rk4(orm, [0.0, 0.0], 0.0, 1.0, 1e-2)
    rep = settling_time(tr, [0.0, 0.0], 0.05)
    assert rep.instant and rep.elapsed == 0.0 and math.isinf(rep.nu_hat)


def test_settling_exponential():
    tr = rk4(DECAY, [1.0], 0.0, 10.0, 1e-3)
    rep = settling_time(tr, [0.0], 0.05)
    assert rep.elapsed == pytest.approx(math.log(20.0), abs=1e-3)
    assert rep.nu_hat == pytest.approx(1.0, rel=1e-3)


def test_settling_last_entry_not_first_crossing():
    times = np.arange(6.0)
    states = np.array([[1.0], [0.01], [0.5], [0.01], [0.0], [0.0]])
    rep = settling_time(Trajectory(times, states, np.zeros_like(states)), [0.0], 0.05)
    assert rep.t_settle == 3.0


def test_not_settled_is_distinct():
    tr = rk4(DECAY, [1.0], 0.0, 1.0, 1e-2)
    rep = settling_time(tr, [0.0], 0.05)
    assert not rep.settled and rep.status == "not settled"


def test_settling_orm_z4(orm):
    tr = rk4(orm, [-2.0, -2.0], 0.0, 50.0, 1e-3)
    assert settling_time(tr, [0.0, 0.0], 0.05).elapsed == pytest.approx(5.37, abs=0.1)


def test_settling_rejects_bad_fraction(orm):
    tr = rk4(orm, [-2.0, -2.0], 0.0, 1.0, 1e-2)
    for c in (0.0, 1.0, -0.5):
        with pytest.raises(ValueError):
            settling_time(tr, [0.0, 0.0], c)


# --- Lyapunov series ----------------------------------------------------------


def test_lyapunov_series_examples(orm, crm):
    series = lyapunov_series(rk4(orm, [-2.0, -2.0], 0.0, 20.0, 1e-3), orm)
    assert series[0, 1] == pytest.approx(8.0)
    assert is_nonincreasing(series)
    series = lyapunov_series(rk4(crm, [1.8, -1.2, -2.0], 0.0, 20.0, 1e-3), crm)
    assert series[0, 1] == pytest.approx(5.44)
    assert is_nonincreasing(series)
    eq = lyapunov_series(rk4(orm, [0.0, 0.0], 0.0, 1.0, 1e-2), orm)
    assert np.all(eq[:, 1] == 0.0)


def test_lyapunov_monotone_all_systems():
    mrac = MracSystem(A=[[0.0, 1.0], [-2.0, -3.0]], B=[0.0, 1.0], Q=np.eye(2), r=Constant(2.0))
    cases = [
        (OrmScalar(-2.0, 1.0, 3.0, 1.0), [1.0, -5.0]),
        (mrac, [1.0, -1.0, 2.0, 0.5]),
        (sincos_identifier(), [3.0, -2.0]),
    ]
    for system, z0 in cases:
        series = lyapunov_series(rk4(system, z0, 0.0, 20.0, 1e-3), system)
        assert is_nonincreasing(series), system.kind


def test_lyapunov_series_tag_mismatch(orm, crm):
    tr = rk4(orm, [-2.0, -2.0], 0.0, 1.0, 1e-2)
    with pytest.raises(TagMismatch):
        lyapunov_series(tr, OrmScalar(-1.0, 1.0, 2.0, 3.0))


def test_mrac_error_bounds():
    m = MracSystem(A=[[0.0, 1.0], [-2.0, -3.0]], B=[0.0, 1.0], Q=np.eye(2), r=SinusoidSum(((2.0, 1.0, 0.0),)))
    z0 = np.array([1.0, -1.0, 3.0, -2.0])
    tr = rk4(m, z0, 0.0, 30.0, 1e-3)
    v0 = m.lyapunov(z0)
    p_min = sym_eig_bounds(m.P)[0]
    q_min = sym_eig_bounds(m.Q)[0]
    e = tr.states[:, :2]
    assert np.max(np.linalg.norm(e, axis=1)) <= math.sqrt(v0 / p_min) * 1.01
    assert trapezoid_integral(tr.times, np.sum(e * e, axis=1)) <= v0 / q_min * 1.01


# --- decay-rate scan ------------------------------------------------------------


def test_linear_decay_is_scale_free():
    reps = decay_rate_scan(DECAY, [[1.0], [10.0], [100.0]], 0.05, horizon=10.0)
    times = [r.elapsed for r in reps]
    assert max(times) - min(times) <= 1e-3
    assert times[0] == pytest.approx(math.log(20.0), abs=1e-3)


def test_orm_decay_slows_with_distance(orm):
    reps = decay_rate_scan(orm, [[-2.0, -2.0], [-2.4, -4.0], [-8 / 3, -8.0]], 0.05)
    times = [r.elapsed for r in reps]
    assert times == pytest.approx([5.37, 5.62, 8.19], abs=0.1)
    assert times[0] < times[1] < times[2]


def test_crm_decay_examples(crm):
    z0s = [[2.0, -1.0, -2.0], [1.8, -1.2, -4.0], [5 / 3, -4 / 3, -8.0]]
    reps = decay_rate_scan(crm, z0s, 0.05)
    assert [r.elapsed for r in reps] == pytest.approx([3.69, 5.85, 12.74], abs=0.6)


def test_decay_scan_survives_divergent_entry():
    unstable = LinearSystem(np.array([[1000.0]]))
    reps = decay_rate_scan(unstable, [[1.0], [0.0]], 0.05, horizon=5.0, h=0.1)
    assert not reps[0].settled and reps[0].error
    assert reps[1].instant
