"""Diagnostics that evaluate the regularity machinery on trajectories.

Exponent arithmetic, the perturbation energy functional, the ODE
barrier for short-time norm propagation, level-set energies and their
geometric iteration toward a sup bound, moment-growth envelopes, and
smoothing-rate fits.  All non-explicit constants of the underlying
estimates are calibrated empirically against run corpora; this module
measures, it does not prove.

Time integrals over trajectories use the trapezoid rule on the recorded
cadence; suprema over time are maxima over samples.  Everything here is
a pure function of immutable trajectories.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .fields import NormRequest, level_set_plus, lp_m_norm, maxwellian, weighted_gradient_energy
from .grid import Field, spectral_gradient
from .solver import Trajectory

__all__ = [
    "ExponentSet",
    "LevelSetEnergyReport",
    "RecurrenceReport",
    "DeGiorgiReport",
    "MomentBoundReport",
    "OdeBarrierReport",
    "SmoothingFitReport",
    "exponents",
    "q_ltheta",
    "moment_bound_check",
    "energy_E0",
    "ode_barrier_check",
    "exit_time_scaling",
    "level_set_energy",
    "level_set_recurrence_check",
    "degiorgi_iterate",
    "calibrate_degiorgi_constant",
    "predict_K",
    "smoothing_fit",
    "h1_smallness",
]


@dataclass(frozen=True)
class ExponentSet:
    """Derived exponents of the smoothing and propagation estimates."""

    p: float
    m: float
    gamma: float
    beta0: float
    beta1: float
    beta2: float
    alpha: float
    q: float
    m_threshold: float

    @property
    def degenerate(self) -> bool:
        """True when m is too small for a positive smoothing exponent."""
        return self.gamma <= 0.0


def exponents(p: float, m: float) -> ExponentSet:
    """All exponents for given (p, m); the two gamma routes must agree.

    gamma > 0 iff m > (9/2)(p-1)/(p-3/2); that case is flagged via
    ``degenerate`` rather than rejected.
    """
    if not p > 1.5:
        raise ValueError(f"exponents require p > 3/2, got {p}")
    if not m > 0.0:
        raise ValueError(f"exponents require m > 0, got {m}")
    gamma = (2.0 * (p - 1.5) / (3.0 * m)) * (m - 4.5 * (p - 1.0) / (p - 1.5))
    q = (5.0 / 3.0) * p - 3.0 * (p - 1.0) / m
    gamma_from_q = q - (p + 1.0)
    if abs(gamma - gamma_from_q) > 1e-12 * max(1.0, abs(gamma)):
        raise AssertionError(f"gamma routes disagree: {gamma} vs {gamma_from_q}")
    inner = max(1.0, p * (p - 1.5) / (p * p - 2.0 * p + 1.5))
    return ExponentSet(
        p=p,
        m=m,
        gamma=gamma,
        beta0=1.0 / (3.0 * (p - 1.0)),
        beta1=2.0 / 3.0 - 3.0 / m,
        beta2=3.0 / m,
        alpha=1.0 - 1.0 / p + 1.0 / (3.0 * (p - 1.0)),
        q=q,
        m_threshold=4.5 * (p - 1.0) / (p - 1.5) * inner,
    )


def q_ltheta(l: float, theta: float) -> float:
    """Admissible moment-growth exponent for the weighted L^1 norm of h."""
    if not l > 9.5:
        raise ValueError(f"moment order must exceed 19/2, got {l}")
    if not 0.0 <= theta <= l:
        raise ValueError(f"weight exponent must lie in [0, {l}], got {theta}")
    return -(2.0 * l * l - 25.0 * l + 57.0) / (18.0 * (l - 2.0)) * (1.0 - theta / l) + theta / l


# --------------------------------------------------------------------------
# trajectory access helpers


def _window_indices(times: np.ndarray, t_a: float, t_b: float) -> np.ndarray:
    idx = np.nonzero((times >= t_a - 1e-12) & (times <= t_b + 1e-12))[0]
    return idx


def _snapshot_h(traj: Trajectory) -> tuple[np.ndarray, list[Field]]:
    mu = maxwellian(traj.grid)
    return np.asarray(traj.snapshot_times), [s - mu for s in traj.snapshots]


def _trapezoid(values: np.ndarray, times: np.ndarray) -> float:
    if len(times) < 2:
        return 0.0
    return float(np.trapezoid(values, times))


# --------------------------------------------------------------------------
# energies


def energy_E0(traj: Trajectory, p: float, window: tuple[float, float]) -> float:
    """sup of ||h||_p^p plus the time-integrated weighted gradient energy.

    Uses the per-step scalar series when p matches the run's recording
    exponent, otherwise recomputes from snapshots.
    """
    t_a, t_b = window
    if p == traj.p:
        idx = _window_indices(traj.times, t_a, t_b)
        if idx.size == 0:
            raise ValueError(f"window {window} contains no samples")
        return float(np.max(traj.lp_p[idx])) + _trapezoid(traj.grad_energy[idx], traj.times[idx])
    times, hs = _snapshot_h(traj)
    idx = _window_indices(times, t_a, t_b)
    if idx.size == 0:
        raise ValueError(f"window {window} contains no snapshots")
    req = NormRequest(p)
    lp_series = np.array([lp_m_norm(hs[i], req) ** p for i in idx])
    ge_series = np.array([weighted_gradient_energy(hs[i], p) for i in idx])
    return float(np.max(lp_series)) + _trapezoid(ge_series, times[idx])


@dataclass(frozen=True)
class LevelSetEnergyReport:
    level: float
    window: tuple[float, float]
    sup_term: float
    dissipation_term: float
    total: float


def level_set_energy(
    traj: Trajectory, level: float, window: tuple[float, float], p: float, c0: float
) -> LevelSetEnergyReport:
    """sup_t ||h_l^+||_p^p + c0 int ||<v>^{-3/2} grad (h_l^+)^{p/2}||_2^2 dt."""
    t_a, t_b = window
    if t_a > t_b:
        raise ValueError(f"bad window {window}")
    times, hs = _snapshot_h(traj)
    if times.size == 0 or t_a < times[0] - 1e-12 or t_b > times[-1] + 1e-12:
        raise ValueError(f"window {window} outside the recorded range")
    idx = _window_indices(times, t_a, t_b)
    req = NormRequest(p)
    sup_term = 0.0
    diss = np.empty(idx.size)
    for out_i, i in enumerate(idx):
        cut = level_set_plus(hs[i], level)
        sup_term = max(sup_term, lp_m_norm(cut, req) ** p)
        diss[out_i] = weighted_gradient_energy(cut, p)
    dissipation = c0 * _trapezoid(diss, times[idx])
    return LevelSetEnergyReport(
        level=level,
        window=(t_a, t_b),
        sup_term=sup_term,
        dissipation_term=dissipation,
        total=sup_term + dissipation,
    )


@dataclass(frozen=True)
class RecurrenceReport:
    """One probe of the energy recurrence between nested levels/windows."""

    k: float
    level: float
    windows: tuple[float, float, float]
    lhs: float
    rhs_unit: float  # right side evaluated with constant 1
    ratio: float  # calibrated constant must dominate this


def level_set_recurrence_check(
    traj: Trajectory,
    k: float,
    level: float,
    t1: float,
    t2: float,
    t3: float,
    p: float,
    m: float,
    c0: float,
) -> RecurrenceReport:
    """Measure E_l(T2,T3) against the nested-level bound from E_k(T1,T3).

    The returned ratio is LHS / RHS(with constant 1); a single finite
    constant dominating the ratios over a probe corpus evidences the
    recurrence discretely.
    """
    if not (0.0 <= t1 < t2 <= t3):
        raise ValueError(f"windows must satisfy 0 <= T1 < T2 <= T3, got {(t1, t2, t3)}")
    if not 0.0 <= k < level:
        raise ValueError(f"levels must satisfy 0 <= k < l, got {(k, level)}")
    exps = exponents(p, m)
    lhs = level_set_energy(traj, level, (t2, t3), p, c0).total
    e_k = level_set_energy(traj, k, (t1, t3), p, c0).total
    e_0 = level_set_energy(traj, 0.0, (t1, t3), p, c0).total
    gap = level - k
    bracket = (
        1.0 / ((t2 - t1) * gap ** (1.0 + exps.gamma))
        + 1.0 / gap**exps.gamma
        + (1.0 + level) / gap ** (1.0 + exps.gamma)
        + (1.0 + level + level**2 + e_0**exps.beta0) / gap ** (2.0 + exps.gamma)
    )
    rhs_unit = (1.0 + t3) ** (1.0 + exps.beta2) * e_k ** (1.0 + exps.beta1) * bracket
    ratio = lhs / rhs_unit if rhs_unit > 0 else (0.0 if lhs == 0.0 else math.inf)
    return RecurrenceReport(k=k, level=level, windows=(t1, t2, t3), lhs=lhs, rhs_unit=rhs_unit, ratio=ratio)


# --------------------------------------------------------------------------
# the geometric level iteration


def predict_K(e0: float, t: float, t_end: float, p: float, m: float, c: float) -> float:
    """Level ceiling implied by the iteration, for calibration constant c."""
    if e0 < 0.0:
        raise ValueError(f"energy must be nonnegative, got {e0}")
    if not 0.0 < t <= t_end:
        raise ValueError(f"need 0 < t <= T, got t={t}, T={t_end}")
    exps = exponents(p, m)
    if exps.degenerate:
        raise ValueError(f"smoothing exponent is not positive for (p={p}, m={m})")
    g, b0, b1, b2 = exps.gamma, exps.beta0, exps.beta1, exps.beta2
    if e0 == 0.0:
        return 0.0
    powers = max(
        e0 ** (b1 / g),
        e0 ** (b1 / (1.0 + g)),
        e0 ** (b1 / (2.0 + g)),
        e0 ** ((b0 + b1) / (2.0 + g)),
        e0 ** (b1 / (1.0 + g)) * t ** (-1.0 / (1.0 + g)),
    )
    return c * powers * (1.0 + t_end) ** ((1.0 + b2) / g)


@dataclass(frozen=True)
class DeGiorgiReport:
    K: float
    t: float
    t_end: float
    levels: tuple[float, ...]
    level_times: tuple[float, ...]
    energies: tuple[float, ...]
    comparison: tuple[float, ...]  # E_0 * Q^-n
    q_factor: float
    verdict: bool
    sup_measured: float
    K_predicted: float


def degiorgi_iterate(
    traj: Trajectory,
    K: float,
    t: float,
    t_end: float,
    p: float,
    m: float,
    c0: float,
    n_max: int = 12,
    calibration_c: float = 1.0,
) -> DeGiorgiReport:
    """Nested level-set energies E_n at levels K(1 - 2^-n), times t(1 - 2^-n).

    The verdict is whether every computed E_n stays below the geometric
    comparison sequence E_0 Q^-n with Q = 2^((gamma+2)/beta1); the
    iteration stops early once the energy falls below 1e-14.
    """
    if not (0.0 < t < t_end):
        raise ValueError(f"need 0 < t < T within the trajectory, got t={t}, T={t_end}")
    if not K > 0.0:
        raise ValueError(f"level ceiling must be positive, got {K}")
    exps = exponents(p, m)
    if exps.degenerate:
        raise ValueError(f"smoothing exponent is not positive for (p={p}, m={m})")
    q_factor = 2.0 ** ((exps.gamma + 2.0) / exps.beta1)

    levels, level_times, energies = [], [], []
    for n_i in range(n_max + 1):
        scale = 1.0 - 2.0**-n_i
        levels.append(K * scale)
        level_times.append(t * scale)
        energies.append(level_set_energy(traj, levels[-1], (level_times[-1], t_end), p, c0).total)
        if energies[-1] < 1e-14:
            break
    e0 = energies[0]
    comparison = [e0 * q_factor**-n_i for n_i in range(len(energies))]
    verdict = all(e <= cmp * (1.0 + 1e-12) for e, cmp in zip(energies, comparison))

    idx = _window_indices(traj.times, t, t_end)
    sup_measured = float(np.max(traj.linf_h[idx])) if idx.size else math.nan
    return DeGiorgiReport(
        K=K,
        t=t,
        t_end=t_end,
        levels=tuple(levels),
        level_times=tuple(level_times),
        energies=tuple(energies),
        comparison=tuple(comparison),
        q_factor=q_factor,
        verdict=verdict,
        sup_measured=sup_measured,
        K_predicted=predict_K(e0, t, t_end, p, m, calibration_c),
    )


def calibrate_degiorgi_constant(
    trajs: list[Trajectory],
    t: float,
    t_end: float,
    p: float,
    m: float,
    c0: float,
    n_max: int = 12,
) -> float:
    """Smallest calibration constant whose predicted ceiling verifies every run.

    Verification means: the geometric decay verdict holds and the ceiling
    dominates the measured sup of |h| over the window.  Monotone in the
    constant (larger ceilings only shrink level sets), so bisection.
    """

    def verifies(c: float) -> bool:
        for traj in trajs:
            e0 = level_set_energy(traj, 0.0, (0.0, t_end), p, c0).total
            K = predict_K(e0, t, t_end, p, m, c)
            if K <= 0.0:
                return False
            rep = degiorgi_iterate(traj, K, t, t_end, p, m, c0, n_max=n_max, calibration_c=c)
            if not rep.verdict or rep.sup_measured > K:
                return False
        return True

    lo, hi = 0.0, 1.0
    for _ in range(60):
        if verifies(hi):
            break
        hi *= 4.0
    else:
        raise RuntimeError("calibration did not converge")
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if mid == lo or mid == hi:
            break
        if verifies(mid):
            hi = mid
        else:
            lo = mid
    return hi


# --------------------------------------------------------------------------
# moment envelopes


@dataclass(frozen=True)
class MomentBoundReport:
    l: float
    theta: float
    exponent: float  # q_{l,theta} + margin
    c3: float
    holds: bool
    worst_margin: float  # max over samples of norm / (c3 (1+t)^exponent)


def moment_bound_check(traj: Trajectory, l: float, theta: float, margin: float = 0.01) -> MomentBoundReport:
    """Fit the envelope ||h(t)||_{L^1_theta} <= C3 (1+t)^(q_{l,theta}+margin)."""
    if theta > traj.m + 1e-12:
        raise ValueError(f"weight exponent {theta} exceeds the run's moment order m={traj.m}")
    exponent = q_ltheta(l, theta) + margin
    times, hs = _snapshot_h(traj)
    req = NormRequest(1.0, theta)
    norms = np.array([lp_m_norm(h, req) for h in hs])
    envelope = (1.0 + times) ** exponent
    c3 = float(np.max(norms / envelope))
    ratios = norms / (c3 * envelope) if c3 > 0 else np.zeros_like(norms)
    return MomentBoundReport(
        l=l,
        theta=theta,
        exponent=exponent,
        c3=c3,
        holds=bool(np.all(norms <= c3 * envelope * (1.0 + 1e-12))),
        worst_margin=float(np.max(ratios)) if c3 > 0 else 0.0,
    )


# --------------------------------------------------------------------------
# the ODE barrier


@dataclass(frozen=True)
class OdeBarrierReport:
    eps: float
    exit_time: float | None  # first time y exceeds eps; None if never
    barrier_held: bool  # y <= eps through the whole run
    c_tilde_min: float  # smallest constant closing the integral inequality
    duhamel_holds: bool  # with the supplied (or minimal) constant
    m_bar: float
    c0: float


def ode_barrier_check(
    traj: Trajectory,
    p: float,
    m: float,
    eps: float,
    c_tilde: float | None = None,
    c0: float | None = None,
) -> OdeBarrierReport:
    """Barrier and integral-inequality check for y(t) = ||h(t)||_p^p.

    Verifies y stays below eps, and measures the smallest constant C for
    which the integral form

        y(t) <= y(0) + C int_0^t ((Mbar + 1) y + y^alpha) ds - (c0/2) int_0^t G ds

    holds at every sample, where G is the weighted gradient energy
    series and Mbar the sup of the weighted L^1 norm of h over the
    snapshots.  The run should start with y(0) < eps/3.
    """
    if p != traj.p:
        raise ValueError(f"trajectory was recorded with p={traj.p}, requested {p}")
    y = traj.lp_p
    if y[0] >= eps / 3.0:
        raise ValueError(f"barrier check needs y(0) < eps/3, got y0={y[0]:.3e}, eps={eps:.3e}")
    exps = exponents(p, m)
    times = traj.times
    above = y > eps
    exit_time = float(times[np.argmax(above)]) if bool(np.any(above)) else None

    times2, hs = _snapshot_h(traj)
    req = NormRequest(1.0, m)
    m_bar = max(lp_m_norm(h, req) for h in hs)
    if c0 is None:
        c0 = float(np.min(traj.c0))

    growth = (m_bar + 1.0) * y + y**exps.alpha
    growth_int = np.concatenate([[0.0], np.cumsum(0.5 * (growth[1:] + growth[:-1]) * np.diff(times))])
    g_int = np.concatenate([[0.0], np.cumsum(0.5 * (traj.grad_energy[1:] + traj.grad_energy[:-1]) * np.diff(times))])

    lhs = y - y[0] + 0.5 * c0 * g_int
    with np.errstate(divide="ignore", invalid="ignore"):
        needed = np.where(growth_int > 0, lhs / growth_int, 0.0)
    c_min = float(np.max(needed[1:])) if len(needed) > 1 else 0.0
    c_min = max(c_min, 0.0)
    c_used = c_tilde if c_tilde is not None else c_min
    duhamel = bool(np.all(y - y[0] <= c_used * growth_int - 0.5 * c0 * g_int + 1e-15))
    return OdeBarrierReport(
        eps=eps,
        exit_time=exit_time,
        barrier_held=exit_time is None,
        c_tilde_min=c_min,
        duhamel_holds=duhamel,
        m_bar=m_bar,
        c0=c0,
    )


def exit_time_scaling(reports: list[OdeBarrierReport]) -> float | None:
    """Log-log slope of exit time against eps over runs that exited."""
    pts = [(r.eps, r.exit_time) for r in reports if r.exit_time is not None and r.exit_time > 0]
    if len(pts) < 2:
        return None
    eps_v = np.log([p[0] for p in pts])
    t_v = np.log([p[1] for p in pts])
    return float(np.polyfit(eps_v, t_v, 1)[0])


# --------------------------------------------------------------------------
# smoothing fit


@dataclass(frozen=True)
class SmoothingFitReport:
    slope: float
    slope_bound: float  # -1/(1+gamma) - tolerance
    envelope_c: float  # calibrated so sup <= C (1 + t^{-1/(1+gamma)}) on the window
    window: tuple[float, float]
    samples: int
    holds: bool


def smoothing_fit(
    traj: Trajectory,
    p: float,
    m: float,
    t_min: float | None = None,
    t_max: float = 0.5,
    slope_tolerance: float = 0.15,
) -> SmoothingFitReport:
    """Least-squares decay rate of log ||h||_inf against log t.

    The envelope constant is the smallest C with
    ||h(t)||_inf <= C (1 + t^{-1/(1+gamma)}) over the fit window, and
    the fitted slope must not be steeper than -1/(1+gamma) by more than
    the tolerance (the estimate is an upper envelope, so faster decay at
    the fitted-window scale would only flag measurement trouble).
    """
    exps = exponents(p, m)
    if exps.degenerate:
        raise ValueError(f"smoothing exponent is not positive for (p={p}, m={m})")
    if t_min is None:
        t_min = 5.0 * float(traj.dt[1]) if len(traj.dt) > 1 else 0.0
    idx = _window_indices(traj.times, t_min, t_max)
    idx = idx[traj.times[idx] > 0]
    if idx.size < 6:
        raise ValueError(f"need at least 6 samples in [{t_min}, {t_max}], found {idx.size}")
    if idx[0] < 4:
        raise ValueError("fit window must start at or after the fourth step")
    t_w = traj.times[idx]
    y_w = traj.linf_h[idx]
    if np.any(y_w <= 0.0):
        raise ValueError("sup norm vanished inside the fit window")
    slope = float(np.polyfit(np.log(t_w), np.log(y_w), 1)[0])
    rate = -1.0 / (1.0 + exps.gamma)
    envelope_c = float(np.max(y_w / (1.0 + t_w**rate)))
    bound = rate - slope_tolerance
    return SmoothingFitReport(
        slope=slope,
        slope_bound=bound,
        envelope_c=envelope_c,
        window=(float(t_w[0]), float(t_w[-1])),
        samples=int(idx.size),
        holds=slope >= bound,
    )


# --------------------------------------------------------------------------
# weighted H^1 smallness


def h1_smallness(traj: Trajectory, t_query: float) -> tuple[float, float]:
    """(||h||_{L^2_1}, ||grad h||_{L^2_2}) at the snapshot nearest t_query."""
    times, hs = _snapshot_h(traj)
    if times.size == 0:
        raise ValueError("trajectory has no snapshots")
    i = int(np.argmin(np.abs(times - t_query)))
    h = hs[i]
    grid = h.grid
    w = grid.cell_volume
    norm_l2_1 = math.sqrt(w * float(np.sum(h.values**2 * grid.bracket_power(1.0))))
    grad = spectral_gradient(h)
    norm_grad = math.sqrt(
        w * float(np.sum(np.sum(grad.values**2, axis=0) * grid.bracket_power(2.0)))
    )
    return norm_l2_1, norm_grad
