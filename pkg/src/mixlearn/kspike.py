"""One-dimensional k-spike learner.

Pipeline: empirical normalized binomial moments (NBMs) of (2k-1)-bit
snapshots -> raw moments via the Pascal matrix -> annihilating polynomial by
an l1-regularized LP -> spike locations as (clamped real parts of) its roots
-> spike weights by simplex-constrained least squares against the moments.

Moment conventions, for a spike distribution (weights t, locations a):

    g_i  = sum_j t_j a_j^i                      (raw moment)
    nu_i = sum_j t_j a_j^i (1 - a_j)^(2k-1-i)   (normalized binomial moment)

and g = nu @ Pas where Pas is the lower-triangular binomial matrix below.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .linalg import eigvalsh_desc, project_to_simplex
from .lp import LpInfeasible, solve_lp
from .model import InputError, KSpikeDistribution

logger = logging.getLogger(__name__)

__all__ = [
    "MomentVector",
    "PascalPair",
    "KSpikeConfig",
    "moments_of",
    "nbm_of",
    "pascal_pair",
    "empirical_nbm",
    "nbm_to_moments",
    "solve_lambda",
    "polynomial_roots",
    "solve_weights",
    "learn_kspike",
    "learn_kspike_from_nbm",
    "vandermonde",
    "binom_profile_matrix",
    "xi_for_sample_count",
]

MAX_PASCAL_SIZE = 60  # binomials stay exact in 64-bit integers up to here


@dataclass(frozen=True)
class MomentVector:
    """Length-2k vector of raw moments or NBMs of a k-spike distribution."""

    kind: str  # 'raw' | 'nbm'
    values: np.ndarray
    k: int

    def __post_init__(self):
        if self.kind not in ("raw", "nbm"):
            raise InputError("kind must be 'raw' or 'nbm'")
        vals = np.asarray(self.values, dtype=float)
        if vals.shape != (2 * self.k,):
            raise InputError("moment vector must have length 2k")
        vals = vals.copy()
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)


@dataclass(frozen=True)
class PascalPair:
    """The size-b binomial matrix Pas_ij = C(b-1-j, i-j) and its exact inverse.

    The inverse carries the same binomials with alternating signs,
    inv_ij = (-1)^(i-j) C(b-1-j, i-j); pas @ inv is the identity in exact
    integer arithmetic.
    """

    b: int
    pas: np.ndarray  # int64, exact
    inv: np.ndarray  # int64, exact


def pascal_pair(b: int) -> PascalPair:
    if b < 1:
        raise InputError("pascal size must be at least 1")
    if b > MAX_PASCAL_SIZE:
        raise InputError(f"pascal size {b} exceeds the 64-bit-exact limit {MAX_PASCAL_SIZE}")
    pas = np.zeros((b, b), dtype=np.int64)
    inv = np.zeros((b, b), dtype=np.int64)
    for i in range(b):
        for j in range(i + 1):
            u = math.comb(b - 1 - j, i - j)
            pas[i, j] = u
            inv[i, j] = -u if (i - j) % 2 else u
    return PascalPair(b=b, pas=pas, inv=inv)


def vandermonde(locations, b: int):
    """V_b: row i holds powers locations[i]^j for j = 0..b-1."""
    loc = np.asarray(locations, dtype=float)
    return loc[:, None] ** np.arange(b)


def binom_profile_matrix(locations, b: int):
    """A_b: row i holds (1-a_i)^(b-1-j) a_i^j; satisfies V_b = A_b @ Pas."""
    loc = np.asarray(locations, dtype=float)
    j = np.arange(b)
    return (1.0 - loc[:, None]) ** (b - 1 - j) * loc[:, None] ** j


def moments_of(d: KSpikeDistribution, count: int | None = None) -> MomentVector:
    """Raw moments g_i for i = 0..count-1 (count defaults to 2k)."""
    count = 2 * d.k if count is None else count
    g = d.weights @ vandermonde(d.locations, count)
    return MomentVector(kind="raw", values=g, k=count // 2)


def nbm_of(d: KSpikeDistribution) -> MomentVector:
    """NBMs at aperture 2k-1: nu_i = sum_j t_j a_j^i (1-a_j)^(2k-1-i)."""
    nu = d.weights @ binom_profile_matrix(d.locations, 2 * d.k)
    return MomentVector(kind="nbm", values=nu, k=d.k)


def empirical_nbm(bit_snapshots, k: int) -> MomentVector:
    """Empirical NBMs from (2k-1)-bit snapshots.

    nu~_i = (#snapshots with exactly i ones) / (N * C(2k-1, i)).
    """
    bits = np.asarray(bit_snapshots)
    if bits.ndim != 2 or bits.shape[0] == 0:
        raise InputError("need a nonempty 2-d array of bit snapshots")
    m = 2 * k - 1
    if bits.shape[1] != m:
        raise InputError(f"bit snapshots must have aperture {m}")
    ones = bits.sum(axis=1)
    freq = np.bincount(ones, minlength=m + 1) / bits.shape[0]
    binom = np.array([math.comb(m, i) for i in range(m + 1)], dtype=float)
    return MomentVector(kind="nbm", values=freq / binom, k=k)


def nbm_to_moments(nu: MomentVector) -> MomentVector:
    """g = nu @ Pas."""
    if nu.kind != "nbm":
        raise InputError("expected an NBM vector")
    pas = pascal_pair(2 * nu.k).pas.astype(float)
    return MomentVector(kind="raw", values=nu.values @ pas, k=nu.k)


@dataclass(frozen=True)
class KSpikeConfig:
    """Inputs of the 1-D learner: spike count, separation floor, moment accuracy.

    The promise tau <= true minimum spike separation must come with
    xi <= tau^(2k); use ``consistent`` to clamp tau down when a caller's
    separation floor is too optimistic for its moment accuracy.
    """

    k: int
    tau: float
    xi: float

    def __post_init__(self):
        if self.k < 1:
            raise InputError("k must be at least 1")
        if not 0.0 < self.tau <= 1.0:
            raise InputError("tau must lie in (0, 1]")
        if self.xi <= 0.0:
            raise InputError("xi must be positive")
        if self.xi > self.tau ** (2 * self.k) * (1.0 + 1e-12):
            raise InputError("xi must not exceed tau^(2k)")

    @property
    def eps_root(self):
        """Root acceptance radius (4/tau) (2 k xi)^(1/k)."""
        return (4.0 / self.tau) * (2.0 * self.k * self.xi) ** (1.0 / self.k)

    @classmethod
    def consistent(cls, k: int, tau: float, xi: float) -> "KSpikeConfig":
        """Build a config, lifting the separation floor to fit xi.

        Spikes closer than xi^(1/(2k)) are unresolvable at accuracy xi, so a
        floor below that carries no information; it is raised to the finest
        resolvable separation (tau only sizes the root-polish radius).
        """
        tau_ok = min(max(tau, xi ** (1.0 / (2 * k))), 1.0)
        return cls(k=k, tau=float(tau_ok), xi=float(xi))


def xi_for_sample_count(k: int, n_samples: int, confidence: float = 0.1) -> float:
    """Default moment-accuracy parameter for N empirical (2k-1)-bit snapshots.

    Each raw moment g~_j is a mean of N iid [0,1] statistics, so by Hoeffding
    ||g~ - g||_2 <= dev := sqrt(2k) sqrt(ln(4k/confidence) / 2N) with
    probability at least 1 - confidence.  Minimizing the l1 norm within a
    budget comparable to the noise drags the annihilator systematically
    toward cheap polynomials, so the default keeps the LP budget 2^k k xi an
    order of magnitude *below* dev: the fit is then effectively
    interpolation, with the l1 constraint only guarding degenerate inputs.
    Constant validated by scripts/calibrate_xi.py.
    """
    if n_samples < 1:
        raise InputError("sample count must be positive")
    dev = math.sqrt(2 * k) * math.sqrt(math.log(4 * k / confidence) / (2.0 * n_samples))
    return max(dev / (2.0**k * k * 10.0), 1e-12)


def solve_lambda(g, xi: float, k: int):
    """Coefficients of the (approximately) annihilating monic polynomial.

    Minimizes ||x||_1 subject to ||G x||_1 <= 2^k k xi and x_k = 1, where
    G_ij = g_(i+j) is the k x (k+1) moment Hankel slice.  Always feasible for
    honest inputs; infeasibility indicates corrupt statistics and raises.
    """
    g = np.asarray(g, dtype=float)
    if g.shape != (2 * k,):
        raise InputError("moment vector must have length 2k")
    hankel = np.array([[g[i + j] for j in range(k + 1)] for i in range(k)])
    gf = hankel[:, :k]
    glast = hankel[:, k]
    budget = (2.0**k) * k * xi

    # variables: u(k), v(k) with x = u - v, and t(k) >= |G x| row-wise
    nv = 3 * k
    cost = np.concatenate([np.ones(2 * k), np.zeros(k)])
    a_ub = np.zeros((2 * k + 1, nv))
    b_ub = np.zeros(2 * k + 1)
    a_ub[:k, :k] = gf
    a_ub[:k, k:2 * k] = -gf
    a_ub[:k, 2 * k:] = -np.eye(k)
    b_ub[:k] = -glast
    a_ub[k:2 * k, :k] = -gf
    a_ub[k:2 * k, k:2 * k] = gf
    a_ub[k:2 * k, 2 * k:] = -np.eye(k)
    b_ub[k:2 * k] = glast
    a_ub[2 * k, 2 * k:] = 1.0
    b_ub[2 * k] = budget
    try:
        sol = solve_lp(cost, a_ub=a_ub, b_ub=b_ub)
    except LpInfeasible as exc:  # pragma: no cover - must not happen
        raise AssertionError("annihilator LP infeasible; corrupt moment input") from exc
    lam = np.empty(k + 1)
    lam[:k] = sol.x[:k] - sol.x[k:2 * k]
    lam[k] = 1.0
    return lam


def polynomial_roots(lam, eps_root: float):
    """Real-clamped approximate roots of the monic polynomial sum lam_l x^l.

    Roots come from the eigenvalues of the (balanced) companion matrix,
    polished by a few Newton steps, then mapped by
    max(0, min(Re(root), 1)) and sorted ascending.
    """
    lam = np.asarray(lam, dtype=float)
    k = lam.size - 1
    if k < 1:
        raise InputError("need a polynomial of degree at least 1")
    if abs(lam[k] - 1.0) > 1e-9:
        raise InputError("leading coefficient must be 1")
    if k == 1:
        roots = np.array([-lam[0]], dtype=complex)
    else:
        comp = np.zeros((k, k))
        comp[1:, :-1] = np.eye(k - 1)
        comp[:, -1] = -lam[:k]
        roots = np.linalg.eigvals(comp).astype(complex)  # LAPACK balances internally
    if not np.all(np.isfinite(roots)):
        raise RuntimeError(f"companion eigenvalue iteration failed for {lam!r}")

    coeffs = lam.astype(complex)
    dcoeffs = coeffs[1:] * np.arange(1, k + 1)
    step_floor = max(eps_root * 1e-6, 1e-15)
    for idx in range(roots.size):
        z = roots[idx]
        for _ in range(20):
            p = np.polyval(coeffs[::-1], z)
            dp = np.polyval(dcoeffs[::-1], z)
            if abs(dp) < 1e-14:
                break
            delta = p / dp
            z -= delta
            if abs(delta) < step_floor:
                break
        if np.isfinite(z) and abs(np.polyval(coeffs[::-1], z)) <= abs(np.polyval(coeffs[::-1], roots[idx])):
            roots[idx] = z
    clamped = np.clip(roots.real, 0.0, 1.0)
    return np.sort(clamped)


def solve_weights(locations, g, tol=1e-12, max_iter=100000, patience=200):
    """Simplex-constrained least squares: min ||y V_2k(locations) - g||_2^2.

    Accelerated projected gradient with exact Euclidean simplex projection;
    stops once no iteration in the trailing window improved the objective by
    more than ``tol``.  A final active-set polish solves the equality-
    constrained problem on the identified support exactly, which is what the
    enumeration oracle in the tests does face by face.
    """
    locations = np.asarray(locations, dtype=float)
    g = np.asarray(g, dtype=float)
    k = locations.size
    if g.shape != (2 * k,):
        raise InputError("moment vector must have length 2k")
    if k == 1:
        return np.ones(1)
    v = vandermonde(locations, 2 * k)
    gram = v @ v.T
    lip = 2.0 * max(eigvalsh_desc(gram)[0], 1e-12)
    step = 1.0 / lip

    def objective(y):
        resid = y @ v - g
        return float(resid @ resid)

    y = np.full(k, 1.0 / k)
    best = y.copy()
    best_obj = objective(y)
    z = y.copy()
    t_momentum = 1.0
    stalled = 0
    for _ in range(max_iter):
        grad = 2.0 * ((z @ v - g) @ v.T)
        y_next = project_to_simplex(z - step * grad)
        t_next = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * t_momentum**2))
        z = y_next + ((t_momentum - 1.0) / t_next) * (y_next - y)
        y, t_momentum = y_next, t_next
        obj = objective(y)
        if obj < best_obj - tol:
            best_obj = obj
            best = y.copy()
            stalled = 0
        else:
            stalled += 1
            if stalled >= patience:
                break

    polished = _polish_support(best, v, g)
    if polished is not None and objective(polished) <= best_obj + tol:
        return polished
    return best


def _polish_support(y, v, g, floor=1e-12):
    """Solve min ||y V - g||^2 with sum(y)=1 exactly on the support of y."""
    support = np.nonzero(y > floor)[0]
    if support.size == 0:
        return None
    vs = v[support]
    m = support.size
    kkt = np.zeros((m + 1, m + 1))
    kkt[:m, :m] = 2.0 * (vs @ vs.T)
    kkt[:m, m] = 1.0
    kkt[m, :m] = 1.0
    rhs = np.concatenate([2.0 * (vs @ g), [1.0]])
    try:
        sol = np.linalg.solve(kkt, rhs)
    except np.linalg.LinAlgError:
        sol, *_ = np.linalg.lstsq(kkt, rhs, rcond=None)
    ys = sol[:m]
    if ys.min() < -1e-10:
        return None
    full = np.zeros_like(y)
    full[support] = np.clip(ys, 0.0, None)
    total = full.sum()
    if total <= 0:
        return None
    return full / total


def learn_kspike_from_nbm(nu: MomentVector, cfg: KSpikeConfig) -> KSpikeDistribution:
    """Run the moment pipeline on an NBM vector (exact or empirical)."""
    if nu.k != cfg.k:
        raise InputError("config and moment vector disagree on k")
    g = nbm_to_moments(nu)
    if abs(g.values[0] - 1.0) > 0.1:
        raise InputError("corrupt statistics: zeroth moment deviates from 1 by > 0.1")
    lam = solve_lambda(g.values, cfg.xi, cfg.k)
    locations = polynomial_roots(lam, cfg.eps_root)
    weights = solve_weights(locations, g.values)
    weights = weights / weights.sum()
    if logger.isEnabledFor(logging.DEBUG):
        # fit residual; the sensitivity analysis bounds it but the constant
        # is too loose to assert per call
        residual = np.linalg.norm(weights @ vandermonde(locations, 2 * cfg.k) - g.values)
        logger.debug("k-spike fit residual ||y V - g|| = %.3e (eps_root %.3e)",
                     residual, cfg.eps_root)
    return KSpikeDistribution(weights=weights, locations=locations)


def learn_kspike(bit_snapshots, cfg: KSpikeConfig) -> KSpikeDistribution:
    """Learn a k-spike distribution from (2k-1)-bit snapshots."""
    nu = empirical_nbm(bit_snapshots, cfg.k)
    return learn_kspike_from_nbm(nu, cfg)
