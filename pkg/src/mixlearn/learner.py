"""Top-level mixture learner.

Stages: estimate the mean distribution and the 2-snapshot matrix, extract the
thresholded covariance eigenspace, learn the 1-D projection of the mixture on
a random orthonormal basis of that space (and on rotated test directions),
reconcile the per-direction spikes into k points, and project each point onto
the simplex in l1.

Two statistics regimes share the code path: ``OracleInputs`` feeds exact
moments everywhere (for calibration experiments against a known source), and
``SampledInputs`` feeds snapshot batches.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .kspike import (
    KSpikeConfig,
    MomentVector,
    binom_profile_matrix,
    empirical_nbm,
    learn_kspike_from_nbm,
    xi_for_sample_count,
)
from .model import InputError, KSpikeDistribution, MixtureSource
from .sampling import RngStream, SnapshotBatch, binarize
from .spectral import empirical_M, estimate_A, random_basis
from .isotropize import estimate_r
from .lp import solve_lp

__all__ = [
    "LearnerConstants",
    "DirectionResult",
    "Matching",
    "MatchingFailure",
    "OracleInputs",
    "SampledInputs",
    "LearnResult",
    "solve_direction_program",
    "learn_direction",
    "match_spikes",
    "simplex_project_l1",
    "simplex_project_l1_lp",
    "learn_mixture",
]


@dataclass(frozen=True)
class LearnerConstants:
    """Derived constants of the pipeline for a given parameter set."""

    n: int
    k: int
    zeta: float
    omega: float
    delta: float
    w_min: float

    def __post_init__(self):
        if self.n < 1 or self.k < 1:
            raise InputError("n and k must be positive")
        if not 0.0 < self.zeta <= 1.0:
            raise InputError("zeta must lie in (0, 1]")
        if self.omega < 1.0:
            raise InputError("omega must be at least 1")
        if self.delta <= 0.0:
            raise InputError("delta must be positive")
        if not 0.0 < self.w_min <= 1.0:
            raise InputError("w_min must lie in (0, 1]")

    @property
    def T(self):
        return 3.0 * self.omega * self.k**4

    @property
    def H(self):
        return 4.0 / (self.w_min**2 * self.zeta * math.sqrt(self.n))

    @property
    def L(self):
        return self.zeta / (64.0 * self.omega**1.5 * self.k**4 * math.sqrt(self.n))

    @property
    def match_tol(self):
        return (math.sqrt(2.0) + 1.0) * self.L / (2.0 + 5.0 * self.T)

    @property
    def delta_bound(self):
        return self.w_min**3 * self.zeta**4 / (2.0**29 * self.omega**5 * self.k**16)

    @property
    def delta_ok(self):
        """Whether delta meets the conservative analysis bound (advisory)."""
        return self.delta <= self.delta_bound

    def as_dict(self):
        return {
            "n": self.n,
            "k": self.k,
            "zeta": self.zeta,
            "omega": self.omega,
            "delta": self.delta,
            "w_min": self.w_min,
            "T": self.T,
            "H": self.H,
            "L": self.L,
            "match_tol": self.match_tol,
            "delta_ok": self.delta_ok,
        }


class MatchingFailure(Exception):
    """Per-direction spike sets could not be reconciled into bijections."""


@dataclass(frozen=True)
class DirectionResult:
    """Outcome of learning the mixture's projection on one direction.

    ``spikes`` lives in the learner's [0, 1] frame; the projections of the
    constituents on the direction are recovered affinely as
    ``scale * location + offset`` (see ``gammas``).
    """

    direction: np.ndarray
    a: np.ndarray
    spikes: KSpikeDistribution
    scale: float
    offset: float

    def __post_init__(self):
        if abs(np.linalg.norm(self.a) - 1.0) > 1e-10:
            raise InputError("direction program output must be a unit vector")

    @property
    def gammas(self):
        return self.scale * self.spikes.locations + self.offset

    @property
    def weights(self):
        return self.spikes.weights


@dataclass(frozen=True)
class Matching:
    """Per-test-direction maps from spikes of the last basis direction.

    ``assignments[j][t]`` is the spike index on basis direction j matched to
    spike t of the last basis direction; each row is a bijection of [k].
    """

    assignments: np.ndarray  # (kprime - 1, k)


def _cap_value(c, v_sorted_desc, v_sq_suffix):
    """max v.x over { ||x||_inf <= c, ||x||_2 <= 1 } plus the maximizing scale.

    The maximizer clips a scaled copy of v at +-c; the scale solves a
    monotone 1-d equation resolved exactly by scanning the sorted order.
    Returns (value, scale) with scale = inf when even full clipping stays
    inside the unit ball.
    """
    m = v_sorted_desc.size
    nnz = int(np.count_nonzero(v_sorted_desc))
    if nnz == 0:
        return 0.0, math.inf
    if c * c * nnz <= 1.0:
        return c * float(v_sorted_desc.sum()), math.inf
    # with j entries clipped at c: s^2 * sum_{i>j} v_i^2 + j c^2 = 1
    for j in range(nnz):
        tail = v_sq_suffix[j]
        if tail <= 0.0:
            continue
        s = math.sqrt(max(1.0 - j * c * c, 0.0) / tail)
        hi_ok = j == 0 or s * v_sorted_desc[j - 1] >= c - 1e-15
        lo_ok = s * v_sorted_desc[j] <= c + 1e-15
        if hi_ok and lo_ok:
            clipped = c * float(v_sorted_desc[:j].sum())
            rest = s * float(tail)
            return clipped + rest, s
    # all nonzero entries clipped
    return c * float(v_sorted_desc.sum()), math.inf


def solve_direction_program(v, delta, zeta, iterations=60):
    """Minimize ||x||_inf over { v.x >= 1 - 4 delta/zeta^2, ||x||_2 <= 1 }.

    Bisection on the l-inf cap: for a fixed cap the inner maximization of
    v.x has the closed form above.  Returns the normalized optimizer
    a = x*/||x*||_2.  Far exceeds the 2-approximation the analysis needs.
    """
    v = np.asarray(v, dtype=float)
    if abs(np.linalg.norm(v) - 1.0) > 1e-8:
        raise InputError("direction must be a unit vector")
    target = 1.0 - 4.0 * delta / zeta**2
    if target <= 0.0:
        return v / np.linalg.norm(v)

    order = np.argsort(-np.abs(v), kind="stable")
    v_sorted = np.abs(v)[order]
    suffix = np.concatenate([np.cumsum(v_sorted[::-1] ** 2)[::-1], [0.0]])

    hi = float(v_sorted[0])
    lo = 0.0
    best_c, best_s = hi, None  # c = ||v||_inf is always feasible (x = v)
    for _ in range(iterations):
        mid = 0.5 * (lo + hi)
        val, s = _cap_value(mid, v_sorted, suffix)
        if val >= target:
            hi = mid
            best_c, best_s = mid, s
        else:
            lo = mid
    x = np.sign(v) * np.minimum((best_s if best_s not in (None, math.inf) else 1e18) * np.abs(v), best_c)
    if best_s is None:
        x = v.copy()
    norm = np.linalg.norm(x)
    if norm <= 0.0:
        return v / np.linalg.norm(v)
    return x / norm


@dataclass(frozen=True)
class OracleInputs:
    """Exact-statistics regime: moments computed from the true source."""

    source: MixtureSource


@dataclass(frozen=True)
class SampledInputs:
    """Snapshot regime: 1-, 2-, and (2k-1)-aperture batches."""

    batch1: SnapshotBatch
    batch2: SnapshotBatch
    batch_hi: SnapshotBatch
    n: int


class _OracleStats:
    def __init__(self, source):
        self.source = source

    @property
    def n(self):
        return self.source.n

    def mean_distribution(self):
        return self.source.mean()

    def two_snapshot_matrix(self):
        return self.source.second_moment_matrix()

    def allocate(self, n_slots):
        return [None] * n_slots

    def direction_nbm(self, slot, point_values, k, rng):
        biases = self.source.constituents @ point_values
        nu = self.source.weights @ binom_profile_matrix(biases, 2 * k)
        return MomentVector(kind="nbm", values=nu, k=k), None


class _SampledStats:
    def __init__(self, inputs: SampledInputs):
        self.inputs = inputs

    @property
    def n(self):
        return self.inputs.n

    def mean_distribution(self):
        return estimate_r(self.inputs.batch1, self.n)

    def two_snapshot_matrix(self):
        return empirical_M(self.inputs.batch2, self.n)

    def allocate(self, n_slots):
        # equal sample budget per Learn call
        return np.array_split(self.inputs.batch_hi.rows, n_slots)

    def direction_nbm(self, slot, point_values, k, rng):
        if slot.shape[0] == 0:
            raise InputError("empty (2k-1)-snapshot chunk for a direction")
        values = point_values[slot]
        bits = binarize(values, rng)
        return empirical_nbm(bits, k), slot.shape[0]


def learn_direction(v, consts: LearnerConstants, stats, slot, rng: RngStream,
                    xi=None, tau_1d=None) -> DirectionResult:
    """Learn the k-spike distribution of the mixture projected on ``v``.

    Items are mapped to a/(2h) shifted by 1/2 into [0, 1], snapshots are
    binarized, the 1-D learner runs, and locations are rescaled by
    2h (a.v) around the shift point.  The scale uses the tight bound
    h = ||a||_inf rather than the worst-case constant H (same [- 1/2, 1/2]
    support contract, far better resolution of the projected spikes).
    """
    a = solve_direction_program(v, consts.delta, consts.zeta)
    h = max(float(np.abs(a).max()), 1e-12)
    point_values = np.clip(a / (2.0 * h) + 0.5, 0.0, 1.0)
    nu, n_samples = stats.direction_nbm(slot, point_values, consts.k, rng)
    if xi is None:
        xi = 1e-12 if n_samples is None else xi_for_sample_count(consts.k, n_samples)
    if tau_1d is None:
        tau_1d = consts.L / (4.0 * h)
    cfg = KSpikeConfig.consistent(consts.k, tau_1d, xi)
    spikes = learn_kspike_from_nbm(nu, cfg)
    scale = 2.0 * h * float(np.dot(a, v))
    return DirectionResult(direction=np.asarray(v, dtype=float), a=a, spikes=spikes,
                           scale=scale, offset=-0.5 * scale)


def _min_gap(values):
    values = np.sort(np.asarray(values, dtype=float))
    if values.size < 2:
        return math.inf
    return float(np.diff(values).min())


def match_spikes(alpha_dirs, zhat_dirs, theta, consts: LearnerConstants, tol=None) -> Matching:
    """Reconcile spikes across directions via the rotated test directions.

    Spike t2 of the last basis direction matches spike t1 of direction j when
    the grid point alpha^j_t1 cos(theta) + alpha^last_t2 sin(theta) lands
    within the matching tolerance of some learned test-direction spike.
    Raises MatchingFailure when any map fails to be a bijection.

    ``tol=None`` uses the analysis tolerance (sqrt(2)+1) L / (2 + 5T), which
    presumes analysis-regime sample sizes; ``tol="auto"`` sizes it from the
    observed spike gaps instead (a quarter of the smallest grid separation
    along the test direction), which is what desk-scale runs need.
    """
    alpha_dirs = np.asarray(alpha_dirs, dtype=float)
    zhat_dirs = np.asarray(zhat_dirs, dtype=float)
    kprime, k = alpha_dirs.shape
    if zhat_dirs.shape != (kprime - 1, k):
        raise InputError("need one test-direction spike set per non-final basis direction")
    last = alpha_dirs[-1]
    assignments = np.full((kprime - 1, k), -1, dtype=int)
    for j in range(kprime - 1):
        if tol == "auto":
            gap = min(_min_gap(alpha_dirs[j]) * abs(math.cos(theta)),
                      _min_gap(last) * abs(math.sin(theta)))
            tol_j = max(0.25 * gap, consts.match_tol)
        else:
            tol_j = consts.match_tol if tol is None else float(tol)
        grid = alpha_dirs[j][:, None] * math.cos(theta) + last[None, :] * math.sin(theta)
        hit = np.abs(grid[:, :, None] - zhat_dirs[j][None, None, :]).min(axis=2) <= tol_j
        for t2 in range(k):
            t1s = np.nonzero(hit[:, t2])[0]
            if t1s.size != 1:
                raise MatchingFailure(
                    f"direction {j}: spike {t2} has {t1s.size} grid matches"
                )
            assignments[j, t2] = t1s[0]
        if len(set(assignments[j])) != k:
            raise MatchingFailure(f"direction {j}: matching is not a bijection")
    return Matching(assignments=assignments)


def simplex_project_l1(phat):
    """An l1-closest point of the probability simplex to ``phat``.

    Combinatorial route: clip negatives, then move the water level.  With
    surplus mass the level caps coordinates from above; with deficit it
    raises the small coordinates.  Matches the LP optimum (the optimal cost
    is sum(max(-phat, 0)) + |sum(max(phat, 0)) - 1|).
    """
    phat = np.asarray(phat, dtype=float)
    n = phat.size
    q = np.maximum(phat, 0.0)
    s = q.sum()
    if abs(s - 1.0) <= 1e-15 and phat.min(initial=0.0) >= 0.0:
        return q
    if s >= 1.0:
        # cap from above: x = min(q, t) with sum = 1
        desc = np.sort(q)[::-1]
        tail = s - np.cumsum(desc)
        for m in range(1, n + 1):
            t = (1.0 - tail[m - 1]) / m
            lo = desc[m] if m < n else 0.0
            if lo - 1e-15 <= t <= desc[m - 1] + 1e-15:
                return np.minimum(q, t)
        raise AssertionError("water level not found")  # pragma: no cover
    # raise from below: x = max(q, t) with sum = 1
    asc = np.sort(q)
    suffix = s - np.cumsum(asc)
    for m in range(1, n + 1):
        t = (1.0 - (suffix[m - 1] if m <= n else 0.0)) / m
        hi = asc[m] if m < n else math.inf
        if asc[m - 1] - 1e-15 <= t <= hi + 1e-15:
            return np.maximum(q, t)
    raise AssertionError("water level not found")  # pragma: no cover


def simplex_project_l1_lp(phat):
    """LP route for the same projection (oracle/reference path)."""
    phat = np.asarray(phat, dtype=float)
    n = phat.size
    # variables: x(n), e+(n), e-(n); x - e+ + e- = phat; sum x = 1
    cost = np.concatenate([np.zeros(n), np.ones(2 * n)])
    a_eq = np.zeros((n + 1, 3 * n))
    a_eq[:n, :n] = np.eye(n)
    a_eq[:n, n:2 * n] = -np.eye(n)
    a_eq[:n, 2 * n:] = np.eye(n)
    a_eq[n, :n] = 1.0
    b_eq = np.concatenate([phat, [1.0]])
    sol = solve_lp(cost, a_eq=a_eq, b_eq=b_eq)
    return sol.x[:n]


@dataclass(frozen=True)
class LearnResult:
    source: MixtureSource
    kprime: int
    degenerate: bool
    attempts: int
    directions: tuple
    manifest: dict = field(default_factory=dict)


def _run_directions(tasks, threads):
    if threads and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(lambda f: f(), tasks))
    return [f() for f in tasks]


def learn_mixture(inputs, k, zeta, omega, delta, w_min, rng: RngStream,
                  xi=None, tau_1d=None, match_tol="auto", retries=8, threads=None) -> LearnResult:
    """Run the full pipeline on exact or sampled statistics.

    Parameters mirror the algorithm inputs: the width parameter ``zeta``,
    confidence scale ``omega``, accuracy scale ``delta``, and the minimum
    mixture weight ``w_min`` (an input; blind estimation of it is not
    supported).  ``xi``/``tau_1d`` override the 1-D learner's moment-accuracy
    and separation parameters; by default they are derived from the
    per-direction sample count and the pipeline constants.

    For a degenerate spectrum (kprime = 0) the best available answer is the
    mean distribution: the result carries k copies of it with uniform
    weights and the ``degenerate`` flag set.
    """
    stats = _OracleStats(inputs.source) if isinstance(inputs, OracleInputs) else _SampledStats(inputs)
    n = stats.n
    consts = LearnerConstants(n=n, k=k, zeta=zeta, omega=omega, delta=delta, w_min=w_min)

    rtilde = stats.mean_distribution()
    mtilde = stats.two_snapshot_matrix()
    sub = estimate_A(mtilde, rtilde, zeta)
    kprime = sub.kprime
    manifest = {
        "constants": consts.as_dict(),
        "kprime": kprime,
        "threshold": sub.threshold,
        "seed": rng.seed,
        "stream": rng.stream,
        "mode": "oracle" if isinstance(inputs, OracleInputs) else "sampled",
    }

    if kprime == 0:
        rt = np.clip(rtilde, 0.0, None)
        rt = rt / rt.sum()
        src = MixtureSource(np.full(k, 1.0 / k), np.tile(rt, (k, 1)))
        return LearnResult(source=src, kprime=0, degenerate=True, attempts=0,
                           directions=(), manifest=manifest)

    basis = random_basis(sub, rng.child(1))
    n_slots = 2 * kprime - 1
    slots = stats.allocate(n_slots)

    tasks = [
        (lambda j=j: learn_direction(basis[:, j], consts, stats, slots[j],
                                     rng.child(10 + j), xi=xi, tau_1d=tau_1d))
        for j in range(kprime)
    ]
    base_results = _run_directions(tasks, threads)
    alpha_dirs = np.array([r.gammas for r in base_results])
    weight_dirs = np.array([r.weights for r in base_results])

    attempts = 0
    test_results = []
    if kprime == 1:
        matching = Matching(assignments=np.zeros((0, k), dtype=int))
    else:
        matching = None
        last_error = None
        for attempt in range(retries):
            attempts = attempt + 1
            theta = float(rng.child(1000 + attempt).generator().uniform(0.0, 2.0 * math.pi))
            tasks = [
                (lambda j=j: learn_direction(
                    math.cos(theta) * basis[:, j] + math.sin(theta) * basis[:, kprime - 1],
                    consts, stats, slots[kprime + j],
                    rng.child(2000 + attempt * 64 + j), xi=xi, tau_1d=tau_1d))
                for j in range(kprime - 1)
            ]
            test_results = _run_directions(tasks, threads)
            zhat_dirs = np.array([r.gammas for r in test_results])
            try:
                matching = match_spikes(alpha_dirs, zhat_dirs, theta, consts, tol=match_tol)
                manifest["theta"] = theta
                break
            except MatchingFailure as exc:
                last_error = exc
        if matching is None:
            raise MatchingFailure(f"matching failed after {retries} retries: {last_error}")

    # assemble constituents: spike t of the last direction anchors point t
    constituents = []
    weights = np.zeros(k)
    proj_r = basis.T @ rtilde
    for t in range(k):
        row_idx = [matching.assignments[j, t] for j in range(kprime - 1)] + [t]
        weights[t] = np.mean([weight_dirs[j][row_idx[j]] for j in range(kprime)])
        coeffs = np.array([alpha_dirs[j][row_idx[j]] - proj_r[j] for j in range(kprime)])
        phat = rtilde + basis @ coeffs
        constituents.append(simplex_project_l1(phat))
    weights = np.clip(weights, 0.0, None)
    weights /= weights.sum()
    rows = np.array([c / c.sum() for c in constituents])
    source = MixtureSource(weights, rows)
    return LearnResult(source=source, kprime=kprime, degenerate=False, attempts=attempts,
                       directions=tuple(base_results + list(test_results)), manifest=manifest)
