import dataclasses
import math

import numpy as np
import pytest
import scipy.sparse as sp

import kgwell.diagnostics as diag
from conftest import interval_setup
from kgwell import (
    CouplingSpec,
    FieldInit,
    NonlinearSolveFailure,
    ScenarioConfig,
    SimState,
    StepOptions,
    Trajectory,
    first_eigenpair,
    prepare,
    simulate,
    step,
    write_trajectory_csv,
)
from kgwell.dynamics import TrajectoryPoint


def without_damping(ops):
    """Same operators with B = 0 and a fresh factorization cache."""
    zero = sp.csr_matrix(ops.B.shape)
    return dataclasses.replace(ops, B=zero, _caches={})


def mnorm(ops, x):
    return math.sqrt(float(x @ (ops.M @ x)))


def linear_energy(ops, st):
    return 0.5 * (st.du @ (ops.M @ st.du) + st.dv @ (ops.M @ st.dv)
                  + st.u @ (ops.K @ st.u) + st.v @ (ops.K @ st.v))


def test_zero_state_is_equilibrium():
    mesh, _, ops = interval_setup(8)
    spec = CouplingSpec(1.0)
    state = SimState.zero(ops.n_free)
    out = step(state, 0.05, ops, spec)
    assert out.t == 0.05
    for name in ("u", "v", "du", "dv"):
        np.testing.assert_allclose(getattr(out, name), 0.0, atol=1e-15)


def test_step_rejects_nonpositive_dt():
    mesh, _, ops = interval_setup(4)
    with pytest.raises(ValueError):
        step(SimState.zero(ops.n_free), 0.0, ops, CouplingSpec(1.0))


def test_state_validation():
    z = np.zeros(3)
    with pytest.raises(ValueError):
        SimState(0.0, z, z, z, np.zeros(2))  # mismatched lengths
    bad = z.copy()
    bad[1] = np.nan
    with pytest.raises(ValueError):
        SimState(0.0, bad, z, z, z)


def test_linear_undamped_step_conserves_energy():
    mesh, _, ops = interval_setup(32)
    ops0 = without_damping(ops)
    lam, w = first_eigenpair(ops0)
    state = SimState(0.0, w, 0.3 * w, np.zeros_like(w), np.zeros_like(w))
    opts = StepOptions(coupling=False)
    e0 = linear_energy(ops0, state)
    for _ in range(50):
        state = step(state, 0.02, ops0, CouplingSpec(1.0), opts)
    assert abs(linear_energy(ops0, state) - e0) <= 1e-12 * e0


def test_single_mode_tracks_harmonic_oracle():
    mesh, _, ops = interval_setup(32)
    ops0 = without_damping(ops)
    lam, w = first_eigenpair(ops0)
    omega = math.sqrt(lam)
    z = np.zeros_like(w)
    state = SimState(0.0, w, z, z, z)
    opts = StepOptions(coupling=False)
    dt, nsteps = 0.01, 100
    for _ in range(nsteps):
        state = step(state, dt, ops0, CouplingSpec(1.0), opts)
    t = nsteps * dt
    err = mnorm(ops0, state.u - math.cos(omega * t) * w)
    assert err < 1e-3 * mnorm(ops0, w)


def test_damped_linear_step_dissipation_identity():
    # implicit midpoint: E(t+dt) - E(t) = -dt (p_mid B p_mid + q_mid B q_mid)
    mesh, _, ops = interval_setup(16)
    rng = np.random.default_rng(2)
    n = ops.n_free
    state = SimState(0.0, rng.standard_normal(n), rng.standard_normal(n),
                     rng.standard_normal(n), rng.standard_normal(n))
    opts = StepOptions(coupling=False)
    dt = 0.01
    new = step(state, dt, ops, CouplingSpec(1.0), opts)
    p_mid = 0.5 * (state.du + new.du)
    q_mid = 0.5 * (state.dv + new.dv)
    expected = -dt * (p_mid @ (ops.B @ p_mid) + q_mid @ (ops.B @ q_mid))
    actual = linear_energy(ops, new) - linear_energy(ops, state)
    assert np.isclose(actual, expected, rtol=1e-10)
    assert actual < 0.0  # boundary velocity generically nonzero


def test_time_reversal_returns_initial_state():
    mesh, _, ops = interval_setup(24)
    ops0 = without_damping(ops)
    _, w = first_eigenpair(ops0)
    w = w / mnorm(ops0, w)
    z = np.zeros_like(w)
    start = SimState(0.0, 0.4 * w, 0.3 * w, z, z)
    spec = CouplingSpec(1.0)
    opts = StepOptions(tol=1e-13, coupling=True)
    dt, nsteps = 1e-3, 1000
    state = start
    for _ in range(nsteps):
        state = step(state, dt, ops0, spec, opts)
    state = SimState(state.t, state.u, state.v, -state.du, -state.dv)
    for _ in range(nsteps):
        state = step(state, dt, ops0, spec, opts)
    assert mnorm(ops0, state.u - start.u) < 1e-6
    assert mnorm(ops0, state.v - start.v) < 1e-6
    assert mnorm(ops0, state.du + start.du) < 1e-6


def test_second_order_convergence_against_analytic_mode():
    mesh, _, ops = interval_setup(32)
    ops0 = without_damping(ops)
    lam, w = first_eigenpair(ops0)
    omega = math.sqrt(lam)
    z = np.zeros_like(w)
    opts = StepOptions(coupling=False)
    T = 1.2

    def final_error(dt):
        state = SimState(0.0, w, z, z, z)
        for _ in range(round(T / dt)):
            state = step(state, dt, ops0, CouplingSpec(1.0), opts)
        eu = mnorm(ops0, state.u - math.cos(omega * T) * w)
        ev = mnorm(ops0, state.du + omega * math.sin(omega * T) * w) / omega
        return eu + ev

    ratio = final_error(0.02) / final_error(0.01)
    assert 3.5 <= ratio <= 4.5


def test_nonlinear_solve_failure_for_huge_dt():
    mesh, _, ops = interval_setup(16)
    _, w = first_eigenpair(ops)
    vnorm = math.sqrt(w @ (ops.K @ w))
    u0 = (5.0 / vnorm) * w
    z = np.zeros_like(u0)
    state = SimState(0.0, u0, u0, z, z)
    with pytest.raises(NonlinearSolveFailure) as err:
        step(state, 10.0, ops, CouplingSpec(1.0))
    assert err.value.time == 0.0


def test_simulate_zero_scenario():
    cfg = ScenarioConfig(name="zero", elements=16, x0=(0.0,), dt=0.01,
                         t_end=0.5, stride=5)
    traj = simulate(cfg)
    assert traj.samples[0].energy.t == 0.0
    np.testing.assert_allclose(traj.energies(), 0.0, atol=1e-30)
    assert np.isclose(traj.meta["t_final"], 0.5)


def test_simulate_admissible_well_and_dt_refinement():
    base = dict(name="well", elements=40, x0=(0.0,), t_end=2.0,
                u0=FieldInit("eigenfunction", 0.1),
                v0=FieldInit("eigenfunction", 0.1))
    traj1 = simulate(ScenarioConfig(dt=2e-3, stride=5, **base))
    traj2 = simulate(ScenarioConfig(dt=1e-3, stride=10, **base))
    lam = traj1.meta["threshold"]
    assert traj1.meta["admissible"]
    m1 = max(p.energy.norm_u_V for p in traj1.samples)
    assert m1 < lam
    # max norm away from the shared initial instant: dt-refinement oracle
    m1_late = max(p.energy.norm_u_V for p in traj1.samples[1:])
    m2_late = max(p.energy.norm_v_V for p in traj2.samples[1:])
    assert abs(m1_late - m2_late) <= 1e-4 * lam


def test_energy_monotone_under_radial_damping(short_admissible_run):
    E = short_admissible_run.energies()
    assert np.all(np.diff(E) <= 1e-9 * E[0])
    assert E[-1] < E[0]


def test_trajectory_validation():
    mesh, _, ops = interval_setup(4)
    spec = CouplingSpec(1.0)
    s0 = SimState.zero(ops.n_free)

    def point(t):
        st = SimState(t, s0.u, s0.v, s0.du, s0.dv)
        return TrajectoryPoint(st, diag.full_sample(st, ops, spec, 0.0, 1, 1.0))

    with pytest.raises(ValueError):
        Trajectory([point(0.5)])  # first sample must sit at t = 0
    with pytest.raises(ValueError):
        Trajectory([point(0.0), point(0.0)])  # strictly increasing times
    Trajectory([point(0.0), point(0.1)])


def test_default_dt_uses_mesh_resolution():
    cfg = ScenarioConfig(name="d", elements=10, x0=(0.0,), t_end=1.0)
    assert prepare(cfg).dt == 0.01  # h/2 = 0.05 capped at 0.01
    cfg = ScenarioConfig(name="d", elements=400, x0=(0.0,), t_end=1.0)
    assert np.isclose(prepare(cfg).dt, 0.00125)  # h/2 below the cap


def test_csv_format_and_determinism(tmp_path):
    cfg = ScenarioConfig(name="det", elements=16, x0=(0.0,), dt=5e-3,
                         t_end=0.2, stride=4,
                         u0=FieldInit("eigenfunction", 0.1),
                         v0=FieldInit("eigenfunction", 0.1))
    p1, p2 = tmp_path / "a.csv", tmp_path / "b.csv"
    write_trajectory_csv(simulate(cfg), p1)
    write_trajectory_csv(simulate(cfg), p2)
    assert p1.read_bytes() == p2.read_bytes()
    header = p1.read_text().splitlines()[0]
    assert header == ("t,E,E_eps,norm_u_V,norm_v_V,norm_du_L2,norm_dv_L2,"
                      "coupling_energy,gamma1_flux_u,gamma1_flux_v,well_margin")


def test_initial_presets():
    cfg = ScenarioConfig(
        name="p", elements=10, x0=(0.0,), t_end=1.0,
        u0=FieldInit("polynomial", 0.3, relative=False),
        v0=FieldInit("bump", 0.2, relative=False),
        u1=FieldInit("eigenfunction", 0.5, relative=False),
    )
    prep = prepare(cfg)
    ops = prep.operators
    # the linear profile x has unit V-norm on (0, 1)
    xs = ops.mesh.vertices[ops.free, 0]
    np.testing.assert_allclose(prep.state0.u, 0.3 * xs, atol=1e-12)
    assert np.all(prep.state0.v > 0)
    assert np.isclose(math.sqrt(prep.state0.du @ (ops.M @ prep.state0.du)), 0.5)
    assert np.isclose(math.sqrt(prep.state0.u @ (ops.K @ prep.state0.u)), 0.3)


def test_initial_preset_relative_amplitude():
    cfg = ScenarioConfig(name="p", elements=10, x0=(0.0,), t_end=1.0,
                         u0=FieldInit("eigenfunction", 0.1))
    prep = prepare(cfg)
    nrm = math.sqrt(prep.state0.u @ (prep.operators.K @ prep.state0.u))
    assert np.isclose(nrm, 0.1 * prep.threshold)


def test_initial_preset_from_file(tmp_path):
    path = tmp_path / "coeffs.txt"
    values = np.linspace(0.0, 1.0, 11) ** 2
    np.savetxt(path, values)
    cfg = ScenarioConfig(name="f", elements=10, x0=(0.0,), t_end=1.0,
                         u0=FieldInit("file", path=str(path)))
    prep = prepare(cfg)
    np.testing.assert_allclose(prep.state0.u, values[prep.operators.free])
    with pytest.raises(ValueError):
        FieldInit("file")  # path required
    with pytest.raises(ValueError):
        FieldInit("fourier")  # unknown preset


def test_compatibility_residual_reported():
    # zero velocities cannot cancel the normal derivative of the
    # eigenfunction on the damped end, so the residual is positive
    cfg = ScenarioConfig(name="c", elements=30, x0=(0.0,), t_end=1.0,
                         u0=FieldInit("eigenfunction", 0.1))
    prep = prepare(cfg)
    assert prep.compat_residual_u > 0.0
    assert prep.compat_residual_v == 0.0
