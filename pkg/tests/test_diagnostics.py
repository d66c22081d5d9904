import math

import numpy as np
import pytest

import kgwell.diagnostics as diag
from _oracles import dense_coupling_energy, dense_multiplier_form
from conftest import interval_setup
from kgwell import (
    CouplingSpec,
    SimState,
    Trajectory,
    well_function,
)
from kgwell.dynamics import TrajectoryPoint


def _state(ops, rng=None, scale=1.0):
    n = ops.n_free
    rng = rng or np.random.default_rng(0)
    return SimState(0.0, scale * rng.uniform(0.2, 1.0, n),
                    scale * rng.uniform(0.2, 1.0, n),
                    scale * rng.standard_normal(n),
                    scale * rng.standard_normal(n))


def test_energy_zero_state():
    mesh, _, ops = interval_setup(8)
    s = diag.energy(SimState.zero(ops.n_free), ops, CouplingSpec(1.0))
    assert s.kinetic == s.potential == s.coupling == s.E == 0.0
    assert s.psi == 0.0 and s.E_eps == 0.0


def test_energy_decomposition_and_homogeneity():
    mesh, _, ops = interval_setup(8)
    spec = CouplingSpec(1.0)
    rng = np.random.default_rng(4)
    base = _state(ops, rng)
    s1 = diag.energy(base, ops, spec)
    assert np.isclose(s1.E, s1.kinetic + s1.potential + s1.coupling, rtol=1e-15)
    scale = 1.7
    s2 = diag.energy(SimState(0.0, scale * base.u, scale * base.v,
                              scale * base.du, scale * base.dv), ops, spec)
    assert np.isclose(s2.kinetic, scale ** 2 * s1.kinetic)
    assert np.isclose(s2.potential, scale ** 2 * s1.potential)
    assert np.isclose(s2.coupling, scale ** 4 * s1.coupling)  # 2 rho + 2


def test_energy_sign_indefinite_for_opposed_fields():
    mesh, _, ops = interval_setup(8)
    spec = CouplingSpec(1.0)
    rng = np.random.default_rng(5)
    u = rng.uniform(0.3, 1.0, ops.n_free)
    z = np.zeros_like(u)
    s = diag.energy(SimState(0.0, u, -u, z, z), ops, spec)
    assert s.coupling < 0
    assert s.E < s.potential
    dense = dense_coupling_energy(ops.mesh, ops.embed(u), ops.embed(-u), 1.0)
    assert np.isclose(s.coupling, dense, rtol=1e-11)


def test_perturbed_energy_limits():
    mesh, _, ops = interval_setup(8)
    spec = CouplingSpec(1.0)
    rng = np.random.default_rng(6)
    u = rng.uniform(0.2, 1.0, ops.n_free)
    v = rng.uniform(0.2, 1.0, ops.n_free)
    z = np.zeros_like(u)
    # zero velocities: psi vanishes
    out = diag.perturbed_energy(SimState(0.0, u, v, z, z), ops, spec, eps=0.3, n=1)
    assert out["psi"] == 0.0
    # eps = 0: perturbed energy equals the energy
    st = SimState(0.0, u, v, 0.5 * u, 0.2 * v)
    out0 = diag.perturbed_energy(st, ops, spec, eps=0.0, n=1)
    assert out0["E_eps"] == diag.energy(st, ops, spec).E


def test_multiplier_functional_against_dense_quadrature():
    mesh, _, ops = interval_setup(12)
    rng = np.random.default_rng(7)
    u = rng.standard_normal(ops.n_free)
    z = np.zeros_like(u)
    st = SimState(0.0, u, z, u, z)  # du = u, v = dv = 0, n = 1
    psi = diag.multiplier_functional(st, ops, n=1)
    dense = 2.0 * dense_multiplier_form(mesh, ops.embed(u), ops.embed(u), [0.0])
    assert np.isclose(psi, dense, rtol=1e-11)


def _manual_trajectory(ops, states, spec=None, eps=0.0, threshold=1.0, meta=None):
    pts = [TrajectoryPoint(s, diag.full_sample(s, ops, spec, eps, ops.mesh.dim, threshold))
           for s in states]
    return Trajectory(pts, meta or {})


def test_check_equivalence_zero_trajectory():
    mesh, _, ops = interval_setup(6)
    wc_like = type("C", (), {"P": 8.0})()
    states = [SimState.zero(ops.n_free, t) for t in (0.0, 0.05, 0.1)]
    traj = _manual_trajectory(ops, states)
    rep = diag.check_equivalence(traj, wc_like)
    assert rep.ok and rep.eps1 == 1.0 / 16.0


def test_check_equivalence_on_admissible_run(short_admissible_run):
    wc = short_admissible_run.meta["constants"]
    rep = diag.check_equivalence(short_admissible_run, wc)
    assert rep.ok


def test_psi_bounded_by_P_times_E(short_admissible_run):
    wc = short_admissible_run.meta["constants"]
    for p in short_admissible_run.samples:
        assert abs(p.energy.psi) <= wc.P * p.energy.E + 1e-12


def test_admissible_run_lower_bounds(short_admissible_run):
    # positivity chain: A >= 0, the well profile nonnegative, and the energy
    # dominating a quarter of the quadratic terms
    wc = short_admissible_run.meta["constants"]
    for p in short_admissible_run.samples:
        e = p.energy
        A = 0.5 * e.potential + e.coupling
        assert A >= -1e-13
        assert well_function(e.norm_u_V, wc.N1, 1.0) >= -1e-13
        assert well_function(e.norm_v_V, wc.N1, 1.0) >= -1e-13
        quarter = 0.5 * e.kinetic + 0.5 * e.potential
        assert e.E >= quarter - 1e-13


def test_check_dissipation_zero_trajectory():
    mesh, _, ops = interval_setup(6)
    states = [SimState.zero(ops.n_free, t) for t in (0.0, 0.05, 0.1)]
    traj = _manual_trajectory(ops, states)
    rep = diag.check_dissipation(traj, ops, m0=1.0)
    assert rep.ok and rep.worst_residual <= 0.0


def test_check_dissipation_interior_velocities():
    # velocities vanishing on the damped boundary:
    # constant energy and zero flux pass with zero slack
    mesh, _, ops = interval_setup(6)
    n = ops.n_free
    du = np.zeros(n)
    du[:-1] = 0.3  # last free node is the damped endpoint
    z = np.zeros(n)
    u = np.zeros(n)
    states = [SimState(t, u, z, du, z) for t in (0.0, 0.05)]
    traj = _manual_trajectory(ops, states)
    rep = diag.check_dissipation(traj, ops, m0=1.0, slack=0.0)
    assert rep.ok and abs(rep.worst_residual) < 1e-14


def test_check_dissipation_rejects_coarse_sampling():
    mesh, _, ops = interval_setup(6)
    states = [SimState.zero(ops.n_free, t) for t in (0.0, 0.5)]
    traj = _manual_trajectory(ops, states)
    with pytest.raises(ValueError):
        diag.check_dissipation(traj, ops, m0=1.0)


def test_check_dissipation_on_admissible_run(short_admissible_run):
    wc = short_admissible_run.meta["constants"]
    ops = short_admissible_run.meta["operators"]
    rep = diag.check_dissipation(short_admissible_run, ops, wc.m0)
    assert rep.ok


def test_decay_report_zero_initial_energy():
    mesh, _, ops = interval_setup(6)
    wc_like = type("C", (), {"P": 8.0, "tau": 1 / 16})()
    states = [SimState.zero(ops.n_free, t) for t in (0.0, 0.05, 0.1)]
    traj = _manual_trajectory(ops, states)
    rep = diag.check_decay_bound(traj, wc_like)
    assert rep.bound_satisfied and rep.max_violation_ratio == 0.0
    assert math.isnan(rep.fitted_rate)


def test_decay_report_on_admissible_run(short_admissible_run):
    wc = short_admissible_run.meta["constants"]
    rep = diag.check_decay_bound(short_admissible_run, wc)
    assert rep.bound_satisfied
    assert rep.equivalence_satisfied
    assert rep.max_violation_ratio <= 1.0
    assert rep.fitted_rate >= wc.tau / 3.0


def test_well_monitor_inadmissible_data():
    from conftest import ScenarioConfig, FieldInit
    from kgwell import simulate
    cfg = ScenarioConfig(name="big", elements=16, x0=(0.0,), dt=5e-3,
                         t_end=0.05, stride=1,
                         u0=FieldInit("eigenfunction", 2.0),
                         v0=FieldInit("eigenfunction", 2.0))
    traj = simulate(cfg)
    wc = traj.meta["constants"]
    assert not traj.meta["admissible"]
    rep = diag.well_monitor(traj, wc)
    assert not rep.invariant_held
    assert traj.samples[0].energy.well_margin_u < 0  # violated from t = 0


def test_well_monitor_zero_trajectory():
    mesh, _, ops = interval_setup(6)
    wc_like = type("C", (), {"P": 8.0, "tau": 1 / 16,
                             "threshold": lambda self: (1.0, "general")})()
    states = [SimState.zero(ops.n_free, t) for t in (0.0, 0.05)]
    traj = _manual_trajectory(ops, states, threshold=1.0,
                              meta={"threshold": 1.0, "threshold_kind": "general"})
    rep = diag.well_monitor(traj, wc_like)
    assert rep.invariant_held
    assert rep.max_norm_u == 0.0 and rep.max_norm_v == 0.0


def test_well_monitor_on_admissible_run(short_admissible_run):
    wc = short_admissible_run.meta["constants"]
    rep = diag.well_monitor(short_admissible_run, wc)
    assert rep.invariant_held
    assert rep.threshold_kind == "regular"
    assert rep.max_norm_u < rep.threshold


def test_report_rendering(short_admissible_run):
    wc = short_admissible_run.meta["constants"]
    ops = short_admissible_run.meta["operators"]
    results = {
        "well": diag.well_monitor(short_admissible_run, wc),
        "equivalence": diag.check_equivalence(short_admissible_run, wc),
        "dissipation": diag.check_dissipation(short_admissible_run, ops, wc.m0),
        "decay": diag.check_decay_bound(short_admissible_run, wc),
    }
    text = diag.render_report(wc, results, header="short run")
    assert "well invariant: held" in text
    assert "decay bound" in text
    lines = diag.report_lines(wc, results)
    joined = "\n".join(lines)
    assert "constants.tau=" in joined
    assert "decay.bound_satisfied=true" in joined
    assert all("=" in ln for ln in lines)
