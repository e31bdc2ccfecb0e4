"""Windowed Gram-matrix excitation analysis and the associated rate bounds.

A signal ``y`` is persistently exciting over windows of length ``T`` when
every Gram integral ``int_t^{t+T} y y^T`` dominates ``alpha * I``.  The scan
below evaluates that integral on a stride grid of window starts using a
cumulative trapezoid rule, with the window end points linearly interpolated
so ``T`` need not be a multiple of the sample step.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .integrate import Trajectory, rk4
from .numerics import TOL, sym_eig_bounds, trapezoid_integral
from .systems import AlgebraicIdSystem, MracSystem


class NotPersistentlyExciting(ValueError):
    def __init__(self, alpha_hat: float, message: str = ""):
        super().__init__(message or f"signal is not persistently exciting (alpha_hat={alpha_hat:.6g})")
        self.alpha_hat = alpha_hat


@dataclass(frozen=True)
class PeSummary:
    window_T: float
    stride: float
    alpha_hat: float
    beta_hat: float
    u_max_hat: float
    windows: list[tuple[float, float, float]] = field(repr=False)

    @property
    def is_pe(self) -> bool:
        return self.alpha_hat > TOL.pe_threshold

    def to_dict(self) -> dict:
        return {
            "window_T": self.window_T,
            "stride": self.stride,
            "alpha_hat": self.alpha_hat,
            "beta_hat": self.beta_hat,
            "u_max_hat": self.u_max_hat,
            "windows": [{"t": t, "min_eig": lo, "max_eig": hi} for t, lo, hi in self.windows],
        }

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)


class _GramAccumulator:
    """``G(t) = int_{t0}^t y y^T`` for any ``t`` in the sample span."""

    def __init__(self, times: np.ndarray, samples: np.ndarray):
        self.t = times
        self.y = samples
        outer = samples[:, :, None] * samples[:, None, :]
        self.outer = outer
        dt = np.diff(times)[:, None, None]
        cum = np.zeros_like(outer)
        cum[1:] = np.cumsum(0.5 * dt * (outer[1:] + outer[:-1]), axis=0)
        self.cum = cum

    def __call__(self, t: float) -> np.ndarray:
        times = self.t
        k = int(np.searchsorted(times, t, side="right")) - 1
        k = min(max(k, 0), len(times) - 1)
        gap = t - times[k]
        if abs(gap) <= TOL.grid * max(1.0, abs(t)) or k == len(times) - 1:
            return self.cum[k]
        w = gap / (times[k + 1] - times[k])
        yt = (1.0 - w) * self.y[k] + w * self.y[k + 1]
        return self.cum[k] + 0.5 * gap * (self.outer[k] + np.outer(yt, yt))


def pe_scan(times, values, window_T: float, stride: float | None = None) -> PeSummary:
    """Gram eigen-bounds over every window ``[t, t + window_T]`` on the stride grid.

    ``values`` holds one sample (scalar or vector) per entry of ``times``.  The
    default stride is ten sample steps.
    """
    t = np.asarray(times, dtype=float)
    y = np.asarray(values, dtype=float)
    if y.ndim == 1:
        y = y[:, None]
    if t.ndim != 1 or t.size < 2 or y.shape[0] != t.size:
        raise ValueError("times and values must be matching sample arrays with at least 2 entries")
    if not window_T > 0.0:
        raise ValueError("window_T must be positive")
    span = t[-1] - t[0]
    slack = TOL.grid * max(1.0, abs(t[-1]))
    if span + slack < window_T:
        raise ValueError(f"signal span {span:.6g} is shorter than one window ({window_T:.6g})")
    if stride is None:
        stride = 10.0 * (t[1] - t[0])
    if not stride > 0.0:
        raise ValueError("stride must be positive")

    gram = _GramAccumulator(t, y)
    n_windows = int(math.floor((span - window_T + slack) / stride)) + 1
    windows = []
    for k in range(n_windows):
        start = t[0] + k * stride
        end = min(start + window_T, t[-1])
        lo, hi = sym_eig_bounds(gram(end) - gram(start))
        windows.append((float(start), max(lo, 0.0), max(hi, 0.0)))
    alpha_hat = min(w[1] for w in windows)
    beta_hat = max(w[2] for w in windows)
    u_max_hat = float(np.max(np.linalg.norm(y, axis=1)))
    return PeSummary(float(window_T), float(stride), alpha_hat, beta_hat, u_max_hat, windows)


def pe_scan_trajectory(traj: Trajectory, window_T: float, stride: float | None = None) -> PeSummary:
    return pe_scan(traj.times, traj.states, window_T, stride)


def rcon(alpha: float, T: float, u_max: float) -> float:
    """Per-window Lyapunov contraction factor ``V(t+T) <= rcon * V(t)``.

    ``1 - (2 alpha^2 / u_max^2) / (T (1 + u_max^2 T)^2)``.
    """
    if not (alpha > 0.0 and T > 0.0 and u_max > 0.0):
        raise ValueError("alpha, T and u_max must be positive")
    if alpha > T * u_max**2 * (1.0 + 1e-12):
        raise ValueError(f"alpha={alpha:.6g} exceeds T*u_max^2={T * u_max**2:.6g}")
    r = 1.0 - (2.0 * alpha**2 / u_max**2) / (T * (1.0 + u_max**2 * T) ** 2)
    if r <= 0.0:
        warnings.warn(f"rcon={r:.6g} <= 0: contraction bound is vacuous", RuntimeWarning, stacklevel=2)
    return r


@dataclass(frozen=True)
class ContractionReport:
    alpha: float
    u_max: float
    rcon: float | None
    rows: list[tuple[int, float, float]]
    at_equilibrium: bool = False

    @property
    def is_pe(self) -> bool:
        return self.rcon is not None

    @property
    def violations(self) -> list[tuple[int, float, float]]:
        if self.rcon is None:
            return []
        return [row for row in self.rows if row[1] > self.rcon + TOL.contraction]

    @property
    def ok(self) -> bool:
        return self.is_pe and not self.violations

    @property
    def status(self) -> str:
        if self.at_equilibrium:
            return "at equilibrium"
        if not self.is_pe:
            return "input not PE; bound vacuous"
        if self.violations:
            k, ratio, bound = self.violations[0]
            return f"bound violated in window {k}: ratio {ratio:.9g} > {bound:.9g}"
        return "ok"


def contraction_check(
    system: AlgebraicIdSystem, phi0, T: float, n_windows: int, h: float = 1e-3
) -> ContractionReport:
    """Compare measured ``V(kT+T)/V(kT)`` against ``rcon`` for each window.

    The step is shrunk to ``T / ceil(T/h)`` so window edges land on the grid.
    ``alpha`` and ``u_max`` are measured from the input samples over the same
    horizon.
    """
    if n_windows < 1:
        raise ValueError("n_windows must be at least 1")
    per_window = int(math.ceil(T / h - 1e-9))
    step = T / per_window
    traj = rk4(system, phi0, 0.0, n_windows * T, step)
    u = np.array([system.input(t) for t in traj.times])
    summary = pe_scan(traj.times, u, T, stride=10 * step)
    if not np.any(np.asarray(phi0, dtype=float)):
        return ContractionReport(summary.alpha_hat, summary.u_max_hat, None, [], at_equilibrium=True)
    bound = None
    if summary.is_pe:
        bound = rcon(summary.alpha_hat, T, summary.u_max_hat)
    V = 0.5 * np.sum(traj.states**2, axis=1)
    rows = []
    for k in range(n_windows):
        v0, v1 = V[k * per_window], V[(k + 1) * per_window]
        rows.append((k, float(v1 / v0), math.nan if bound is None else bound))
    return ContractionReport(summary.alpha_hat, summary.u_max_hat, bound, rows)


class _TransitionODE:
    """``Phi' = -u u^T Phi`` flattened row-major."""

    def __init__(self, system: AlgebraicIdSystem):
        self.system = system
        self.n = system.state_dim
        self.state_dim = self.n * self.n
        self.tag = "transition:" + system.tag

    def rhs(self, t, z):
        u = self.system.input(t)
        Phi = z.reshape(self.n, self.n)
        return (-np.outer(u, u @ Phi)).ravel()


def transition_determinant_check(
    system: AlgebraicIdSystem, t0: float, t1: float, h: float = 1e-3
) -> tuple[float, float]:
    """``(det Phi(t1, t0), exp(-int trace(u u^T)))`` from independent routes.

    The first is obtained by integrating the matrix ODE, the second by
    quadrature of ``||u||^2``.
    """
    n = system.state_dim
    ode = _TransitionODE(system)
    step = (t1 - t0) / math.ceil((t1 - t0) / h - 1e-9)
    traj = rk4(ode, np.eye(n).ravel(), t0, t1, step)
    det = float(np.linalg.det(traj.states[-1].reshape(n, n)))
    trace = np.array([float(system.input(t) @ system.input(t)) for t in traj.times])
    return det, float(math.exp(-trapezoid_integral(traj.times, trace)))


# ---------------------------------------------------------------------------
# weak-PE bounds for the MRAC regressor


def _check_positive(**kw):
    for name, v in kw.items():
        if not v > 0.0:
            raise ValueError(f"{name} must be positive, got {v!r}")


def _pmin(alpha, T, beta, zeta, P_min_eig, Q_min_eig):
    k = (math.sqrt(zeta / P_min_eig) + 2.0 * beta) * math.sqrt(T * zeta / Q_min_eig)
    return (k / alpha) ** 2


def _alpha_prime(p, alpha, T, beta, zeta, P_min_eig, Q_min_eig):
    return p * alpha - (math.sqrt(zeta / P_min_eig) + 2.0 * beta) * math.sqrt(p * T * zeta / Q_min_eig)


def pmin(alpha, T, beta, zeta, P_min_eig, Q_min_eig) -> float:
    """Smallest window multiplier for which the regressor excitation bound is positive."""
    _check_positive(alpha=alpha, T=T, beta=beta, zeta=zeta, P_min_eig=P_min_eig, Q_min_eig=Q_min_eig)
    return _pmin(alpha, T, beta, zeta, P_min_eig, Q_min_eig)


def alpha_prime(p, alpha, T, beta, zeta, P_min_eig, Q_min_eig) -> float:
    """Guaranteed excitation level of the plant state over windows of length ``p*T``."""
    _check_positive(p=p, alpha=alpha, T=T, beta=beta, zeta=zeta, P_min_eig=P_min_eig, Q_min_eig=Q_min_eig)
    return _alpha_prime(p, alpha, T, beta, zeta, P_min_eig, Q_min_eig)


@dataclass(frozen=True)
class Lemma1Bounds:
    alpha: float
    T: float
    beta: float
    zeta: float
    P_min_eig: float
    Q_min_eig: float

    @property
    def p_min(self) -> float:
        return _pmin(self.alpha, self.T, self.beta, self.zeta, self.P_min_eig, self.Q_min_eig)

    def alpha_prime_at(self, p: float) -> float:
        return _alpha_prime(p, self.alpha, self.T, self.beta, self.zeta, self.P_min_eig, self.Q_min_eig)

    def to_dict(self) -> dict:
        return {
            "alpha": self.alpha,
            "T": self.T,
            "beta": self.beta,
            "zeta": self.zeta,
            "P_min_eig": self.P_min_eig,
            "Q_min_eig": self.Q_min_eig,
            "p_min": self.p_min,
        }


@dataclass(frozen=True)
class Lemma1Result:
    gram_min_eig: float
    alpha_prime_bound: float
    satisfied: bool
    p: float
    bounds: Lemma1Bounds
    reference_alpha_hat: float

    @property
    def above_p_min(self) -> bool:
        return self.p > self.bounds.p_min

    def to_dict(self) -> dict:
        return {
            "p": self.p,
            "gram_min_eig": self.gram_min_eig,
            "alpha_prime_bound": self.alpha_prime_bound,
            "satisfied": self.satisfied,
            "above_p_min": self.above_p_min,
            "reference_alpha_hat": self.reference_alpha_hat,
            "bounds": self.bounds.to_dict(),
        }


def lemma1_bounds(system: MracSystem, z0, T: float, times, xm) -> tuple[Lemma1Bounds, float]:
    """Bounds for the level set through ``z0`` given reference-state samples."""
    ref = pe_scan(times, xm, T)
    if not ref.is_pe:
        raise NotPersistentlyExciting(ref.alpha_hat)
    beta = float(np.max(np.linalg.norm(np.reshape(xm, (len(xm), -1)), axis=1)))
    zeta = system.lyapunov(np.asarray(z0, dtype=float))
    P_min = sym_eig_bounds(system.P)[0]
    Q_min = sym_eig_bounds(system.Q)[0]
    return Lemma1Bounds(ref.alpha_hat, T, beta, zeta, P_min, Q_min), ref.alpha_hat


def lemma1_empirical(
    system: MracSystem, z0, T: float, p: float, horizon: float, h: float = 1e-2
) -> Lemma1Result:
    """Check the plant-state excitation bound over windows of length ``p*T``.

    The reference state must be PE at window ``T``; ``beta`` is its largest
    sampled norm and ``zeta = V(z0)``.  ``satisfied`` compares the worst
    windowed Gram eigenvalue of ``x = e + x_m`` against ``alpha'(p)``.
    """
    _check_positive(T=T, p=p, horizon=horizon, h=h)
    if horizon < p * T:
        raise ValueError(f"horizon {horizon:.6g} is shorter than the window p*T={p * T:.6g}")
    traj = rk4(system, z0, system.t0, system.t0 + horizon, h)
    xm = np.array([system.reference_state(t) for t in traj.times])
    bounds, ref_alpha = lemma1_bounds(system, z0, T, traj.times, xm)
    x = traj.states[:, : system.n] + xm
    gram_min = pe_scan(traj.times, x, p * T).alpha_hat
    bound = bounds.alpha_prime_at(p)
    return Lemma1Result(
        gram_min_eig=gram_min,
        alpha_prime_bound=bound,
        satisfied=gram_min >= bound - TOL.contraction,
        p=p,
        bounds=bounds,
        reference_alpha_hat=ref_alpha,
    )


def level_set_point(system: MracSystem, zeta: float) -> np.ndarray:
    """State on ``V = zeta`` along the direction ``e = (1, 0, ...)``, ``phi = -(1, ..., 1)``."""
    _check_positive(zeta=zeta)
    d = np.zeros(system.state_dim)
    d[0] = 1.0
    d[system.n :] = -1.0
    return d * math.sqrt(zeta / system.lyapunov(d))


def lemma1_sweep(
    system: MracSystem,
    zetas,
    T: float = 1.0,
    factor: float = 2.0,
    h: float = 1e-2,
    horizon_factor: float = 1.5,
) -> list[Lemma1Result]:
    """Run ``lemma1_empirical`` at ``p = factor * p_min`` for each level ``zeta``.

    ``p_min`` is first estimated from the reference state over ``[t0, t0 + 4T]``;
    the trajectory then spans ``max(horizon_factor * p, 4) * T``.
    """
    if not factor > 1.0 or not horizon_factor >= 1.0:
        raise ValueError("factor must exceed 1 and horizon_factor must be at least 1")
    times = system.t0 + np.linspace(0.0, 4.0 * T, int(round(4.0 * T / h)) + 1)
    xm = np.array([system.reference_state(t) for t in times])
    out = []
    for zeta in zetas:
        z0 = level_set_point(system, zeta)
        bounds, _ = lemma1_bounds(system, z0, T, times, xm)
        p = factor * bounds.p_min
        out.append(lemma1_empirical(system, z0, T, p, max(horizon_factor * p, 4.0) * T, h))
    return out
