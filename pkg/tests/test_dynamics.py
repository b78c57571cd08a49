import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ispsim.dynamics import (
    DEFAULT_GIMBAL_INERTIA,
    MODELLER_INERTIA,
    DynamicState,
    FrictionModel,
    GimbalModel,
    InertiaTensor,
    SimulationDivergence,
    friction_torque,
    pitch_acceleration,
    step_dynamics,
    system_energy,
    yaw_acceleration,
)
from ispsim.frames import FrameId, GimbalAngles, RateVector, euler_dcm, quat_identity

NO_FRICTION = FrictionModel(0.0, 0.0, 0.01)
FREE = GimbalModel(friction_pitch=NO_FRICTION, friction_yaw=NO_FRICTION)
SYMMETRIC = InertiaTensor(0.0166, 0.0164, 0.0166)


def _state(psi=0.0, theta=0.0, psi_dot=0.0, theta_dot=0.0, wb=(0.0, 0.0, 0.0)):
    return DynamicState(GimbalAngles(psi, theta, psi_dot, theta_dot),
                        base_rate=RateVector(*wb, FrameId.BASE))


def _yaw_momentum(x, model):
    """Inertial angular momentum of both bodies about the (fixed) base z axis."""
    psi, theta, psi_dot, theta_dot = x[:4]
    d = euler_dcm(GimbalAngles(psi, theta))
    wg = np.array([0.0, 0.0, psi_dot])
    wp = d["L_PG"] @ wg + np.array([0.0, theta_dot, 0.0])
    Ig = np.diag([model.inertia_g.Ixx, model.inertia_g.Iyy, model.inertia_g.Izz])
    Ip = np.diag([model.inertia_p.Ixx, model.inertia_p.Iyy, model.inertia_p.Izz])
    h = d["L_GB"].T @ (Ig @ wg) + d["L_PB"].T @ (Ip @ wp)
    return h[2]


# -- inertia / friction ------------------------------------------------------

def test_modeller_tensor_values():
    assert (MODELLER_INERTIA.Ixx, MODELLER_INERTIA.Iyy, MODELLER_INERTIA.Izz) == (0.0048, 0.0164, 0.0166)
    assert DEFAULT_GIMBAL_INERTIA.Izz == 0.0100


@pytest.mark.parametrize("moments", [(0.0, 1.0, 1.0), (-1.0, 1.0, 1.0), (0.1, 0.1, 1.0)])
def test_inertia_rejects_unphysical(moments):
    with pytest.raises(ValueError):
        InertiaTensor(*moments)


@pytest.mark.parametrize(
    "rate, viscous, coulomb, expected",
    [(0.0, 0.0005, 0.002, 0.0), (2.0, 0.001, 0.0, -0.002), (10.0, 0.0, 0.005, -0.005)],
)
def test_friction_examples(rate, viscous, coulomb, expected):
    assert friction_torque(rate, FrictionModel(viscous, coulomb, 0.01)) == pytest.approx(expected, abs=1e-12)


@given(st.floats(-100, 100))
def test_friction_is_dissipative_and_odd(rate):
    m = FrictionModel()
    assert friction_torque(rate, m) * rate <= 0.0
    assert friction_torque(-rate, m) == -friction_torque(rate, m)


def test_friction_rejects_negative():
    with pytest.raises(ValueError):
        FrictionModel(viscous_coeff=-1.0)


# -- accelerations -------------------------------------------------------------

def test_pitch_rest():
    assert pitch_acceleration(_state(), MODELLER_INERTIA, 0.0) == 0.0


def test_pitch_cross_term_example():
    # base rate (1, 0, 2) at zero angles gives platform rate (1, 0, 2)
    s = _state(wb=(1.0, 0.0, 2.0))
    assert pitch_acceleration(s, MODELLER_INERTIA, 0.0) == pytest.approx(1.4390, abs=1e-4)
    assert pitch_acceleration(s, MODELLER_INERTIA, 0.0) == pytest.approx(0.0118 * 2 / 0.0164, rel=1e-12)


def test_pitch_symmetric_platform():
    assert pitch_acceleration(_state(), SYMMETRIC, 0.0164) == pytest.approx(1.0, rel=1e-12)


@pytest.mark.parametrize(
    "theta, torque",
    [(0.0, 0.0100 + 0.0166), (math.pi / 2, 0.0100 + 0.0048), (0.0, 0.0)],
)
def test_yaw_examples(theta, torque):
    expected = 1.0 if torque else 0.0
    got = yaw_acceleration(_state(theta=theta), MODELLER_INERTIA, DEFAULT_GIMBAL_INERTIA, torque)
    assert got == pytest.approx(expected, abs=1e-12)


@pytest.mark.parametrize("theta", [0.0, math.pi / 2])
def test_yaw_theta_dot_coupling_at_cardinal_angles(theta):
    # with zero yaw torque the momentum about the fixed base z axis is constant
    model = FREE
    x = np.array([0.0, theta, 0.7, 1.3, *quat_identity()])
    dt = 1e-6
    h0 = _yaw_momentum(x, model)
    x1 = np.array(model.step(0.0, list(x), 0.0, 0.0, lambda t: ((0, 0, 0), (0, 0, 0)), dt))
    assert (_yaw_momentum(x1, model) - h0) / dt == pytest.approx(0.0, abs=1e-6)


@settings(max_examples=50)
@given(st.floats(-1.5, 1.5), st.floats(-3, 3), st.floats(-3, 3), st.floats(-3, 3), st.floats(-1, 1), st.floats(-1, 1))
def test_accelerations_linear_in_torque(theta, pd, td, wbz, t1, t2):
    s = _state(theta=theta, psi_dot=pd, theta_dot=td, wb=(0.2, -0.1, wbz))
    Ip, Ig = MODELLER_INERTIA, DEFAULT_GIMBAL_INERTIA
    p0 = pitch_acceleration(s, Ip, 0.0)
    assert pitch_acceleration(s, Ip, t1 + t2) - p0 == pytest.approx(
        (pitch_acceleration(s, Ip, t1) - p0) + (pitch_acceleration(s, Ip, t2) - p0), abs=1e-9)
    y0 = yaw_acceleration(s, Ip, Ig, 0.0)
    assert yaw_acceleration(s, Ip, Ig, t1 + t2) - y0 == pytest.approx(
        (yaw_acceleration(s, Ip, Ig, t1) - y0) + (yaw_acceleration(s, Ip, Ig, t2) - y0), abs=1e-9)


# -- integration ---------------------------------------------------------------

def test_fixed_point():
    s = _state()
    s1 = step_dynamics(s, (0.0, 0.0), GimbalModel(), 0.001)
    np.testing.assert_array_equal(s1.as_vector(), s.as_vector())


def test_constant_torque_closed_form():
    model = GimbalModel(inertia_p=SYMMETRIC, friction_pitch=NO_FRICTION, friction_yaw=NO_FRICTION)
    T = 0.0164 * 0.5
    s = _state()
    dt = 0.001
    for k in range(100):
        s = step_dynamics(s, (T, 0.0), model, dt, t=k * dt)
    a = T / SYMMETRIC.Iyy
    assert s.angles.theta_dot == pytest.approx(a * 0.1, abs=1e-8)
    assert s.angles.theta == pytest.approx(0.5 * a * 0.1 ** 2, abs=1e-8)
    # decoupling with I_xxp = I_zzp at theta near 0
    assert s.angles.psi_dot == pytest.approx(0.0, abs=1e-8)


def _run(x0, dt, total, model=FREE):
    x = list(x0)
    for k in range(int(round(total / dt))):
        x = model.step(k * dt, x, 0.0, 0.0, lambda t: ((0, 0, 0), (0, 0, 0)), dt)
    return np.array(x)


def test_rk4_fourth_order():
    x0 = [0.0, 0.3, 2.0, 1.5, *quat_identity()]
    ref = _run(x0, 0.01 / 16, 1.0)
    e1 = np.linalg.norm(_run(x0, 0.01, 1.0)[:4] - ref[:4])
    e2 = np.linalg.norm(_run(x0, 0.005, 1.0)[:4] - ref[:4])
    assert 12.0 < e1 / e2 < 20.0


def test_energy_and_yaw_momentum_conserved():
    x0 = np.array([0.0, 0.3, 2.0, 1.5, *quat_identity()])
    state0 = DynamicState.from_vector(x0)
    e0 = system_energy(state0, FREE.inertia_p, FREE.inertia_g)
    h0 = _yaw_momentum(x0, FREE)
    x = _run(x0, 0.001, 10.0)
    e1 = system_energy(DynamicState.from_vector(x), FREE.inertia_p, FREE.inertia_g)
    assert abs(e1 - e0) / e0 <= 1e-6
    assert _yaw_momentum(x, FREE) == pytest.approx(h0, rel=1e-6)


def test_friction_dissipates_energy():
    x0 = np.array([0.0, 0.3, 2.0, 1.5, *quat_identity()])
    model = GimbalModel()
    e0 = system_energy(DynamicState.from_vector(x0), model.inertia_p, model.inertia_g)
    x = _run(x0, 0.001, 1.0, model)
    assert system_energy(DynamicState.from_vector(x), model.inertia_p, model.inertia_g) < e0


def test_deterministic():
    s = _state(theta=0.2, psi_dot=0.5, wb=(0.1, 0.2, 0.3))
    a = step_dynamics(s, (0.01, -0.02), GimbalModel(), 0.001)
    b = step_dynamics(s, (0.01, -0.02), GimbalModel(), 0.001)
    assert a.as_vector().tobytes() == b.as_vector().tobytes()


def test_divergence_raises():
    with pytest.raises(SimulationDivergence):
        step_dynamics(_state(), (math.inf, 0.0), GimbalModel(), 0.001)


def test_rejects_nonpositive_dt():
    with pytest.raises(ValueError):
        step_dynamics(_state(), (0.0, 0.0), GimbalModel(), 0.0)


def test_lock_joints_holds_angles():
    model = GimbalModel(lock_joints=True)
    s = _state(theta=0.2, wb=(0.5, 0.5, 0.5))
    s1 = step_dynamics(s, (1.0, 1.0), model, 0.01)
    assert s1.angles.theta == pytest.approx(0.2)
    assert s1.angles.psi_dot == 0.0


# -- energy oracle -------------------------------------------------------------

def test_energy_examples():
    Ip, Ig = MODELLER_INERTIA, DEFAULT_GIMBAL_INERTIA
    assert system_energy(_state(), Ip, Ig) == 0.0
    assert system_energy(_state(theta_dot=1.0), Ip, Ig) == pytest.approx(0.0082, rel=1e-12)


@given(st.floats(-1.5, 1.5), st.floats(-5, 5), st.floats(-5, 5))
def test_energy_quadratic(theta, pd, td):
    Ip, Ig = MODELLER_INERTIA, DEFAULT_GIMBAL_INERTIA
    e = system_energy(_state(theta=theta, psi_dot=pd, theta_dot=td), Ip, Ig)
    e2 = system_energy(_state(theta=theta, psi_dot=2 * pd, theta_dot=2 * td), Ip, Ig)
    assert e2 == pytest.approx(4 * e, rel=1e-12, abs=1e-15)
