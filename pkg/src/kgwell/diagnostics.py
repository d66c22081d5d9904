"""Energy functionals along trajectories and the verification checks:
well invariance, perturbed-energy equivalence, boundary dissipation, and
the exponential decay bound E(t) <= 3 E(0) exp(-tau t / 3).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .assembly import CouplingSpec, DiscreteOperators, coupling_energy
from .constants import WellConstants

#: Ratio checks switch to this absolute slack once E drops below
#: 1e-12 * E(0); relative statements are meaningless in the roundoff floor.
NEAR_ZERO_SLACK = 1e-12


@dataclass(frozen=True)
class EnergySample:
    """Energy breakdown at one instant.

    E = kinetic + potential + coupling holds by construction; psi is the
    multiplier functional 2(u', m.grad u) + (n-1)(u', u) + (same in v) and
    E_eps = E + eps * psi the perturbed energy.  Margins are threshold
    minus V-norm (positive while the state sits inside the well).
    """

    t: float
    kinetic: float
    potential: float
    coupling: float
    E: float
    psi: float
    E_eps: float
    well_margin_u: float
    well_margin_v: float
    norm_u_V: float
    norm_v_V: float
    norm_du_L2: float
    norm_dv_L2: float
    flux_u: float
    flux_v: float


def _quad(mat, x) -> float:
    return float(x @ (mat @ x))


def energy(state, operators: DiscreteOperators, spec: CouplingSpec) -> EnergySample:
    """Energy fields only (psi = 0, margins unset); see full_sample for the
    complete record."""
    return full_sample(state, operators, spec, eps=0.0, n=operators.mesh.dim,
                       threshold=math.nan)


def perturbed_energy(state, operators: DiscreteOperators, spec: CouplingSpec,
                     eps: float, n: int) -> dict[str, float]:
    """psi and E_eps = E + eps * psi for the given perturbation size."""
    s = full_sample(state, operators, spec, eps=eps, n=n, threshold=math.nan)
    return {"psi": s.psi, "E_eps": s.E_eps}


def multiplier_functional(state, operators: DiscreteOperators, n: int) -> float:
    """psi = 2 u'.(G u) + (n-1) u'.(M u) + 2 v'.(G v) + (n-1) v'.(M v)."""
    G, M = operators.G, operators.M
    psi = 2.0 * float(state.du @ (G @ state.u)) + 2.0 * float(state.dv @ (G @ state.v))
    if n != 1:
        psi += (n - 1) * (float(state.du @ (M @ state.u)) + float(state.dv @ (M @ state.v)))
    return psi


def full_sample(state, operators: DiscreteOperators, spec: CouplingSpec | None,
                eps: float, n: int, threshold: float) -> EnergySample:
    """Complete energy record; spec=None means the coupling is switched off
    and its energy contribution is zero."""
    M, K, B = operators.M, operators.K, operators.B
    ku = _quad(K, state.u)
    kv = _quad(K, state.v)
    mu = _quad(M, state.du)
    mv = _quad(M, state.dv)
    kinetic = 0.5 * (mu + mv)
    potential = 0.5 * (ku + kv)
    coup = 0.0 if spec is None else coupling_energy(state, spec, operators.mesh, operators)
    E = kinetic + potential + coup
    psi = multiplier_functional(state, operators, n)
    nu, nv = math.sqrt(max(ku, 0.0)), math.sqrt(max(kv, 0.0))
    return EnergySample(
        t=state.t, kinetic=kinetic, potential=potential, coupling=coup,
        E=E, psi=psi, E_eps=E + eps * psi,
        well_margin_u=threshold - nu, well_margin_v=threshold - nv,
        norm_u_V=nu, norm_v_V=nv,
        norm_du_L2=math.sqrt(max(mu, 0.0)), norm_dv_L2=math.sqrt(max(mv, 0.0)),
        flux_u=_quad(B, state.du), flux_v=_quad(B, state.dv),
    )


# ---------------------------------------------------------------------------
# trajectory checks
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class EquivalenceReport:
    ok: bool
    eps1: float
    worst_low: float   # min of E_eps - E/2  (should be >= -slack)
    worst_high: float  # max of E_eps - 3E/2 (should be <= slack)
    worst_t: float


def check_equivalence(trajectory, constants: WellConstants) -> EquivalenceReport:
    """Verify E/2 <= E + eps1 psi <= 3E/2 with eps1 = 1/(2P) at every sample
    (absolute slack near E = 0)."""
    eps1 = 1.0 / (2.0 * constants.P)
    worst_low = math.inf
    worst_high = -math.inf
    worst_t = 0.0
    ok = True
    for p in trajectory.samples:
        e = p.energy
        e_eps = e.E + eps1 * e.psi
        low = e_eps - 0.5 * e.E
        high = e_eps - 1.5 * e.E
        if low < worst_low:
            worst_low, worst_t = low, e.t
        if high > worst_high:
            worst_high = high
        if low < -NEAR_ZERO_SLACK or high > NEAR_ZERO_SLACK:
            ok = False
            worst_t = e.t
    return EquivalenceReport(ok=ok, eps1=eps1, worst_low=worst_low,
                             worst_high=worst_high, worst_t=worst_t)


@dataclass(frozen=True)
class DissipationReport:
    ok: bool
    worst_residual: float   # max of dE/dt + m0 * trace forms (<= slack)
    worst_t: float
    slack: float


def check_dissipation(trajectory, operators: DiscreteOperators, m0: float,
                      slack: float | None = None) -> DissipationReport:
    """Finite-difference check of dE/dt <= -m0 (||u'||^2 + ||v'||^2 on the
    damped boundary), the trace forms evaluated through T at the midpoint of
    each sample pair.  Sample spacing must not exceed 0.1."""
    samples = trajectory.samples
    if len(samples) < 2:
        raise ValueError("need at least two samples for a dissipation check")
    gaps = np.diff(trajectory.times())
    if np.max(gaps) > 0.1 + 1e-12:
        raise ValueError(
            f"sample spacing {np.max(gaps):g} too coarse for a finite-difference "
            "derivative; need stride * dt <= 0.1"
        )
    if slack is None:
        dt = trajectory.meta.get("dt", float(np.min(gaps)))
        slack = 10.0 * dt * samples[0].energy.E
    T = operators.T
    worst = -math.inf
    worst_t = 0.0
    for a, b in zip(samples[:-1], samples[1:]):
        dt_ab = b.energy.t - a.energy.t
        dE = (b.energy.E - a.energy.E) / dt_ab
        du_mid = 0.5 * (a.state.du + b.state.du)
        dv_mid = 0.5 * (a.state.dv + b.state.dv)
        flux = _quad(T, du_mid) + _quad(T, dv_mid)
        residual = dE + m0 * flux
        if residual > worst:
            worst, worst_t = residual, a.energy.t
    return DissipationReport(ok=worst <= slack, worst_residual=worst,
                             worst_t=worst_t, slack=slack)


@dataclass(frozen=True)
class DecayReport:
    """Exponential decay verdict for one trajectory.

    bound_satisfied means E(t) <= tolerance * 3 E(0) exp(-tau t/3) at every
    sample; fitted_rate is the least-squares slope of log E (expected to be
    at least tau/3, reported, never asserted).
    """

    E0: float
    tau: float
    fitted_rate: float
    bound_satisfied: bool
    max_violation_ratio: float
    equivalence_satisfied: bool


def check_decay_bound(trajectory, constants: WellConstants,
                      tolerance: float = 1.0) -> DecayReport:
    times = trajectory.times()
    energies = trajectory.energies()
    E0 = float(energies[0])
    rate = constants.tau / 3.0
    if E0 <= 0.0:
        ratio = 0.0 if np.all(energies <= NEAR_ZERO_SLACK) else math.inf
    else:
        bound = 3.0 * E0 * np.exp(-rate * times)
        ratio = float(np.max(energies / bound))
    window = energies > 1e-12 * max(E0, 0.0)
    if E0 > 0 and np.count_nonzero(window) >= 2:
        slope = np.polyfit(times[window], np.log(energies[window]), 1)[0]
        fitted = -float(slope)
    else:
        fitted = math.nan
    return DecayReport(
        E0=E0, tau=constants.tau, fitted_rate=fitted,
        bound_satisfied=bool(ratio <= tolerance * (1.0 + 1e-12)),
        max_violation_ratio=ratio,
        equivalence_satisfied=check_equivalence(trajectory, constants).ok,
    )


@dataclass(frozen=True)
class WellReport:
    max_norm_u: float
    max_norm_v: float
    threshold: float
    threshold_kind: str
    invariant_held: bool


def well_monitor(trajectory, constants: WellConstants) -> WellReport:
    """Did both V-norms stay strictly below the active well threshold?"""
    threshold = trajectory.meta.get("threshold")
    kind = trajectory.meta.get("threshold_kind")
    if threshold is None:
        threshold, kind = constants.threshold()
    mu = max(p.energy.norm_u_V for p in trajectory.samples)
    mv = max(p.energy.norm_v_V for p in trajectory.samples)
    return WellReport(
        max_norm_u=mu, max_norm_v=mv, threshold=threshold,
        threshold_kind=kind, invariant_held=bool(mu < threshold and mv < threshold),
    )


# ---------------------------------------------------------------------------
# report rendering: human block + machine key=value lines
# ---------------------------------------------------------------------------

def _fmt(x) -> str:
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, float):
        return f"{x:.17g}"
    return str(x)


def report_lines(constants: WellConstants, results: dict) -> list[str]:
    """Flatten constants and check results into sorted key=value lines."""
    out = {}
    for name in ("rho", "dim", "c0", "c1", "c2", "c3", "lambda1", "R", "m0",
                 "N", "lambda_star", "N1", "lambda1_star", "P", "D", "tau",
                 "safety"):
        out[f"constants.{name}"] = getattr(constants, name)
    for group, rep in results.items():
        if rep is None:
            continue
        if isinstance(rep, dict):
            items = rep.items()
        else:
            items = vars(rep).items()
        for key, val in items:
            out[f"{group}.{key}"] = val
    return [f"{k}={_fmt(v)}" for k, v in sorted(out.items())]


def render_report(constants: WellConstants, results: dict, header: str = "") -> str:
    lines = []
    if header:
        lines += [header, "-" * len(header)]
    thr, kind = constants.threshold()
    lines.append(
        f"well thresholds: general lambda* = {constants.lambda_star:.6g}, "
        f"regular lambda1* = {constants.lambda1_star:.6g} (active: {kind})"
    )
    lines.append(
        f"decay constants: P = {constants.P:.6g}, D = {constants.D:.6g}, "
        f"m0 = {constants.m0:.6g}, tau = {constants.tau:.6g}"
    )
    well = results.get("well")
    if well is not None:
        lines.append(
            f"well invariant: {'held' if well.invariant_held else 'VIOLATED'} "
            f"(max |u|_V = {well.max_norm_u:.6g}, max |v|_V = {well.max_norm_v:.6g}, "
            f"threshold {well.threshold:.6g})"
        )
    eq = results.get("equivalence")
    if eq is not None:
        lines.append(
            f"perturbed-energy equivalence: {'holds' if eq.ok else 'FAILS'} "
            f"(eps1 = {eq.eps1:.6g}, worst low margin {eq.worst_low:.3e}, "
            f"worst high margin {eq.worst_high:.3e})"
        )
    di = results.get("dissipation")
    if di is not None:
        lines.append(
            f"dissipation inequality: {'holds' if di.ok else 'FAILS'} "
            f"(worst residual {di.worst_residual:.3e} vs slack {di.slack:.3e})"
        )
    de = results.get("decay")
    if de is not None:
        lines.append(
            f"decay bound E(t) <= 3 E0 exp(-tau t/3): "
            f"{'holds' if de.bound_satisfied else 'FAILS'} "
            f"(max ratio {de.max_violation_ratio:.6g}, fitted rate "
            f"{de.fitted_rate:.6g} vs tau/3 = {de.tau / 3.0:.6g})"
        )
    return "\n".join(lines)
