"""Constants controlling the potential well and the decay estimate.

Everything here reduces to linear algebra on the assembled operators:

* lambda1: smallest eigenvalue of K x = lambda M x (clamped nodes removed);
* c0, c1: discrete best constants of the volume embeddings
  ||v||_{L^p(Omega)} <= c ||v||_V for p = 2(rho+1) and p = 4;
* c2, c3: discrete best constants of the boundary traces
  ||w||_{L^p(Gamma1)} <= c ||w||_V for p = 4 and p = 2;
* the derived well thresholds (N, lambda_star) and (N1, lambda1_star),
  the perturbation bound P, the boundary flux coefficient D and the decay
  rate tau = min(1/(2P), m0/D).

The best constants are maximized over the finite-element space only, so
they are lower bounds for their continuum counterparts; callers inflate
them by a safety factor (default 1.1) before forming thresholds, which
shrinks the admissible ball and keeps the well test conservative.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.sparse.linalg as spla

from .assembly import DiscreteOperators, element_quadrature_tables
from .geometry import BOUNDARY_QUAD_DEGREE, BoundaryPartition, Mesh

_DENSE_EIG_LIMIT = 400


class SetupError(Exception):
    """Numerical setup failed (singular operators, eigensolver trouble)."""


class ConvergenceError(Exception):
    """A best-constant fixed-point iteration did not settle within its cap."""


def _require_constrained(operators: DiscreteOperators):
    if len(operators.partition.gamma0_facets) == 0:
        raise SetupError(
            "no clamped boundary part: the gradient form is only a seminorm, "
            "so eigenvalues and embedding constants are not defined"
        )


def first_eigenpair(operators: DiscreteOperators) -> tuple[float, np.ndarray]:
    """Smallest eigenpair of K x = lambda M x, residual-checked to 1e-10."""
    _require_constrained(operators)
    K, M = operators.K, operators.M
    n = operators.n_free
    try:
        if n <= _DENSE_EIG_LIMIT:
            vals, vecs = scipy.linalg.eigh(K.toarray(), M.toarray())
            lam, x = float(vals[0]), vecs[:, 0]
        else:
            vals, vecs = spla.eigsh(K, k=1, M=M, sigma=0.0, which="LM",
                                    v0=np.ones(n))
            lam, x = float(vals[0]), vecs[:, 0]
        # polish by inverse iteration until the residual is well inside the
        # 1e-10 contract (dense eigh alone can sit right at the edge)
        lu = operators.cache(("lu_K",), lambda: spla.splu(K.tocsc()))
        for _ in range(20):
            residual = np.linalg.norm(K @ x - lam * (M @ x)) / np.linalg.norm(M @ x)
            if residual < 1e-11 * max(1.0, lam):
                break
            y = lu.solve(M @ x)
            x = y / math.sqrt(float(y @ (M @ y)))
            lam = float(x @ (K @ x)) / float(x @ (M @ x))
    except SetupError:
        raise
    except Exception as exc:  # singular mass/stiffness surfaces here
        raise SetupError(f"eigensolver failed: {exc}") from exc
    if not (np.isfinite(lam) and lam > 0):
        raise SetupError(f"first eigenvalue {lam} is not positive")
    residual = np.linalg.norm(K @ x - lam * (M @ x)) / np.linalg.norm(M @ x)
    if residual >= 1e-10:
        raise SetupError(f"eigenpair residual {residual:.3e} exceeds 1e-10")
    # deterministic sign: largest-magnitude entry positive
    if x[np.argmax(np.abs(x))] < 0:
        x = -x
    return lam, x


def first_eigenvalue(operators: DiscreteOperators) -> float:
    return first_eigenpair(operators)[0]


def _vnorm(operators: DiscreteOperators, x: np.ndarray) -> float:
    return math.sqrt(max(float(x @ (operators.K @ x)), 0.0))


def _volume_lp(mesh: Mesh, operators: DiscreteOperators, x: np.ndarray,
               p: float, degree: int):
    """(||v_h||_{L^p}, gradient of ||.||_p^p / p wrt coefficients)."""
    def build():
        _, wdet, shapes = element_quadrature_tables(mesh, degree)
        return wdet, shapes
    wdet, shapes = operators.cache(("lp", degree), build)
    conn = mesh.elements
    vq = operators.embed(x)[conn] @ shapes.T
    norm = float(np.sum(np.abs(vq) ** p * wdet)) ** (1.0 / p)
    g = np.zeros(operators.n_nodes)
    np.add.at(g, conn, (np.abs(vq) ** (p - 2.0) * vq * wdet) @ shapes)
    return norm, g[operators.free]


def _trace_lp(mesh: Mesh, partition: BoundaryPartition,
              operators: DiscreteOperators, x: np.ndarray, p: float):
    g1 = partition.gamma1_facets
    pts, wts, shp = mesh.facet_quadrature(BOUNDARY_QUAD_DEGREE)
    wts = wts[g1]
    conn = mesh.facets[g1]
    vq = operators.embed(x)[conn] @ shp.T
    norm = float(np.sum(np.abs(vq) ** p * wts)) ** (1.0 / p)
    g = np.zeros(operators.n_nodes)
    np.add.at(g, conn, (np.abs(vq) ** (p - 2.0) * vq * wts) @ shp)
    return norm, g[operators.free]


def _best_constant(operators: DiscreteOperators, norm_and_grad, tol: float,
                   max_iter: int):
    """Maximize ||v||_X / ||v||_V over the FE space by inverse iteration on
    the optimality system K v = mu * grad(||v||_X^p / p); one K-solve per
    iterate, stopping when the quotient moves less than `tol`."""
    _require_constrained(operators)
    lu = operators.cache(("lu_K",), lambda: spla.splu(operators.K.tocsc()))
    _, v = first_eigenpair(operators)
    v = v / _vnorm(operators, v)
    quotient, _ = norm_and_grad(v)
    for _ in range(max_iter):
        _, g = norm_and_grad(v)
        gnorm = np.linalg.norm(g)
        if gnorm == 0.0:
            raise ConvergenceError("optimality gradient vanished; trivial trace?")
        w = lu.solve(g)
        nv = _vnorm(operators, w)
        if not np.isfinite(nv) or nv == 0.0:
            raise ConvergenceError("iteration produced a degenerate iterate")
        v = w / nv
        new_quotient, _ = norm_and_grad(v)
        done = abs(new_quotient - quotient) < tol
        quotient = new_quotient
        if done:
            return quotient, v
    raise ConvergenceError(
        f"best-constant iteration did not converge within {max_iter} iterations"
    )


def embedding_constant(mesh: Mesh, operators: DiscreteOperators, p: float,
                       tol: float = 1e-9, max_iter: int = 500) -> float:
    """Discrete best constant of ||v||_{L^p(Omega)} <= c ||v||_V.

    Lower bound for the continuum constant (the maximum runs over the FE
    space only); inflate before deriving thresholds from it.
    """
    if p < 2:
        raise ValueError("p must be at least 2")
    degree = max(4, math.ceil(p) + 2)
    c, _ = _best_constant(
        operators,
        lambda x: _volume_lp(mesh, operators, x, p, degree),
        tol, max_iter,
    )
    return c


def trace_constant(mesh: Mesh, partition: BoundaryPartition,
                   operators: DiscreteOperators, p: float,
                   tol: float = 1e-9, max_iter: int = 500) -> float:
    """Discrete best constant of ||w||_{L^p(Gamma1)} <= c ||w||_V."""
    if p < 2:
        raise ValueError("p must be at least 2")
    if len(partition.gamma1_facets) == 0:
        raise ValueError("damped boundary part is empty")
    c, _ = _best_constant(
        operators,
        lambda x: _trace_lp(mesh, partition, operators, x, p),
        tol, max_iter,
    )
    return c


@dataclass(frozen=True)
class WellConstants:
    """Every constant of the well and decay machinery for one configuration.

    c0..c3 are the embedding/trace constants as used in the formulas (already
    inflated when a safety factor was requested); N/lambda_star gate the
    general-exponent well, N1/lambda1_star the quadratic-coupling (rho = 1)
    well; tau is the guaranteed exponential decay rate of the energy bound
    E(t) <= 3 E(0) exp(-tau t / 3).
    """

    rho: float
    dim: int
    c0: float
    c1: float
    c2: float
    c3: float
    lambda1: float
    R: float
    m0: float
    N: float
    lambda_star: float
    N1: float
    lambda1_star: float
    P: float
    D: float
    tau: float
    safety: float = 1.0

    def threshold(self) -> tuple[float, str]:
        """Active well threshold: the rho = 1 set for the regular/decay
        harness, the general set otherwise."""
        if self.rho == 1.0:
            return self.lambda1_star, "regular"
        return self.lambda_star, "general"


def well_constants(rho: float, n: int, c0: float, c1: float, c2: float,
                   c3: float, lambda1: float, R: float, m0: float,
                   safety: float = 1.0) -> WellConstants:
    """Evaluate the threshold and decay formulas.

    N       = c0^(2(rho+1)) / (2(rho+1))
    lambda* = (1/(4N))^(1/(2 rho))
    N1      = (c1^4/2)(n + 1/4) + R c2^4 / 2 + c1^4 (n - 1)
    lambda1*= (1/(4 N1))^(1/2)
    P       = 4 (2R + (n-1)/2 + (n-1)/(2 lambda1))
    D       = R^3 + R + R^2 (n-1)^2 c3^2
    tau     = min(1/(2P), m0/D)
    """
    inputs = dict(rho=rho, c0=c0, c1=c1, c2=c2, c3=c3, lambda1=lambda1, R=R, m0=m0)
    for name, val in inputs.items():
        if not (np.isfinite(val) and val > 0):
            raise ValueError(f"{name} must be positive and finite, got {val}")
    if n < 1:
        raise ValueError("n must be at least 1")
    N = c0 ** (2 * (rho + 1)) / (2 * (rho + 1))
    lambda_star = (1.0 / (4.0 * N)) ** (1.0 / (2.0 * rho))
    N1 = (c1 ** 4 / 2.0) * (n + 0.25) + R * c2 ** 4 / 2.0 + c1 ** 4 * (n - 1)
    lambda1_star = (1.0 / (4.0 * N1)) ** 0.5
    P = 4.0 * (2.0 * R + (n - 1) / 2.0 + (n - 1) / (2.0 * lambda1))
    D = R ** 3 + R + R ** 2 * (n - 1) ** 2 * c3 ** 2
    tau = min(1.0 / (2.0 * P), m0 / D)
    return WellConstants(
        rho=rho, dim=n, c0=c0, c1=c1, c2=c2, c3=c3, lambda1=lambda1, R=R,
        m0=m0, N=N, lambda_star=lambda_star, N1=N1,
        lambda1_star=lambda1_star, P=P, D=D, tau=tau, safety=safety,
    )


def compute_well_constants(mesh: Mesh, partition: BoundaryPartition,
                           operators: DiscreteOperators, rho: float,
                           safety: float = 1.1) -> WellConstants:
    """Full pipeline: eigenvalue, embedding/trace constants (inflated by
    `safety`), then the threshold formulas."""
    lam1 = first_eigenvalue(operators)
    p0 = 2.0 * (rho + 1.0)
    c1 = embedding_constant(mesh, operators, 4.0)
    c0 = c1 if p0 == 4.0 else embedding_constant(mesh, operators, p0)
    c2 = trace_constant(mesh, partition, operators, 4.0)
    c3 = trace_constant(mesh, partition, operators, 2.0)
    return well_constants(
        rho, mesh.dim, safety * c0, safety * c1, safety * c2, safety * c3,
        lam1, partition.R, partition.m0, safety=safety,
    )


def well_function(lam: float, N: float, rho: float) -> float:
    """Well profile J(lambda) = lambda^2 / 4 - N lambda^(2(rho+1)).

    Positive on (0, lambda_star), zero at lambda_star, negative beyond.
    """
    if lam < 0:
        raise ValueError("lambda must be nonnegative")
    return 0.25 * lam ** 2 - N * lam ** (2.0 * (rho + 1.0))


@dataclass(frozen=True)
class AdmissibilityReport:
    """Smallness check on initial data: both displacement norms below the
    threshold and the energy-like functional L below threshold^2 / 4."""

    L: float
    norm_u0: float
    norm_v0: float
    vel_u1: float
    vel_v1: float
    threshold: float
    threshold_kind: str
    norms_below_lambda_star: bool
    L_below_quarter_lambda_star_sq: bool

    @property
    def admissible(self) -> bool:
        return self.norms_below_lambda_star and self.L_below_quarter_lambda_star_sq


def admissibility(u0, v0, u1, v1, constants: WellConstants,
                  operators: DiscreteOperators,
                  use_regular: bool | None = None) -> AdmissibilityReport:
    """Evaluate the well-entry conditions for the given coefficient data.

    The V-norm is sqrt(x K x) and the L2 norm sqrt(x M x).  With
    use_regular (default: rho == 1) the quadratic-coupling set
    (N1, lambda1_star, fourth powers) is used, otherwise the general set.
    """
    if use_regular is None:
        use_regular = constants.rho == 1.0
    K, M = operators.K, operators.M
    nu0 = math.sqrt(max(float(u0 @ (K @ u0)), 0.0))
    nv0 = math.sqrt(max(float(v0 @ (K @ v0)), 0.0))
    au1 = math.sqrt(max(float(u1 @ (M @ u1)), 0.0))
    av1 = math.sqrt(max(float(v1 @ (M @ v1)), 0.0))
    kinetic = 0.5 * (au1 ** 2 + av1 ** 2)
    potential = 0.5 * (nu0 ** 2 + nv0 ** 2)
    if use_regular:
        lam, kind = constants.lambda1_star, "regular"
        L = kinetic + potential + constants.N1 * (nu0 ** 4 + nv0 ** 4)
    else:
        lam, kind = constants.lambda_star, "general"
        q = 2.0 * (constants.rho + 1.0)
        L = kinetic + potential + constants.N * (nu0 ** q + nv0 ** q)
    return AdmissibilityReport(
        L=L, norm_u0=nu0, norm_v0=nv0, vel_u1=au1, vel_v1=av1,
        threshold=lam, threshold_kind=kind,
        norms_below_lambda_star=bool(nu0 < lam and nv0 < lam),
        L_below_quarter_lambda_star_sq=bool(L < 0.25 * lam ** 2),
    )


@dataclass(frozen=True)
class RegimeCheck:
    name: str
    applies: bool
    satisfied: bool
    detail: str


@dataclass(frozen=True)
class ValidationReport:
    rho: float
    n: int
    theta: float | None
    regimes: tuple[RegimeCheck, ...]

    @property
    def valid(self) -> bool:
        return any(r.satisfied for r in self.regimes)

    def lines(self):
        out = [f"rho={self.rho:g} n={self.n} theta="
               + ("none" if self.theta is None else f"{self.theta:g}")]
        for r in self.regimes:
            status = "ok" if r.satisfied else ("fails" if r.applies else "n/a")
            out.append(f"  {r.name:26s} {status:5s} {r.detail}")
        out.append(f"  overall: {'valid' if self.valid else 'no regime satisfied'}")
        return out


def _close(a: float, b: float) -> bool:
    return math.isclose(a, b, rel_tol=1e-9, abs_tol=1e-12)


def validate_hypotheses(rho: float, n: int, theta: float | None = None) -> ValidationReport:
    """Arithmetic check of which existence/regularity regime (rho, n, theta)
    falls in.  Out-of-range pairs yield 'no regime', not an error."""
    if n < 1:
        raise ValueError("n must be at least 1")
    regimes = []

    applies = n <= 2
    if not applies:
        sat, detail = False, "needs n <= 2"
    elif rho <= 0:
        sat, detail = False, "needs rho > 0"
    elif theta is None:
        sat = True
        detail = f"any theta > max(1, 1/(4 rho)) = {max(1.0, 1.0 / (4 * rho)):g} works"
    else:
        sat = theta > 1.0 and 4.0 * rho * theta >= 1.0
        detail = f"needs theta > 1 and 4 rho theta >= 1; got 4 rho theta = {4 * rho * theta:g}"
    regimes.append(RegimeCheck("low_dimension", applies, applies and sat, detail))

    applies = 3 <= n <= 6
    if applies:
        lo, hi = (n + 2) / (8 * n), (n + 2) / (4 * (n - 2))
        sat = lo <= rho <= hi
        detail = f"needs {lo:g} <= rho <= {hi:g}"
    else:
        sat, detail = False, "needs 3 <= n <= 6"
    regimes.append(RegimeCheck("intermediate_dimension", applies, applies and sat, detail))

    applies = 7 <= n <= 11
    if applies:
        rho_req, theta_req = 2.0 / (n - 2), n / (n - 2)
        sat = _close(rho, rho_req) and (theta is None or _close(theta, theta_req))
        detail = f"requires rho = {rho_req:g} and theta = {theta_req:g}"
    else:
        sat, detail = False, "needs 7 <= n <= 11"
    regimes.append(RegimeCheck("high_dimension", applies, applies and sat, detail))

    applies = n <= 3
    sat = (_close(rho, 1.0) and n <= 3) or (rho > 1.0 and n <= 2)
    detail = "regular solutions and decay: rho = 1 with n <= 3, or rho > 1 with n <= 2"
    regimes.append(RegimeCheck("regular_decay", applies, sat, detail))

    return ValidationReport(rho=rho, n=n, theta=theta, regimes=tuple(regimes))


def with_safety(constants: WellConstants, safety: float) -> WellConstants:
    """Re-derive thresholds after rescaling the embedding/trace constants."""
    scale = safety / constants.safety
    return well_constants(
        constants.rho, constants.dim, scale * constants.c0, scale * constants.c1,
        scale * constants.c2, scale * constants.c3, constants.lambda1,
        constants.R, constants.m0, safety=safety,
    )
