"""Fixed-step RK4 trajectories and settling-time diagnostics."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .numerics import TOL
from .systems import DimensionError, System, equilibrium

MAX_STEPS = 10**8


class IntegrationDiverged(ArithmeticError):
    def __init__(self, t: float):
        super().__init__(f"non-finite state encountered at t={t:.17g}")
        self.t = t


class TagMismatch(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    derivs: np.ndarray
    system_tag: str = ""

    def __post_init__(self):
        if not (len(self.times) == len(self.states) == len(self.derivs)):
            raise ValueError("times, states and derivs must have equal length")

    def __len__(self):
        return len(self.times)

    @property
    def step(self) -> float:
        return float(self.times[1] - self.times[0]) if len(self.times) > 1 else 0.0

    @property
    def dim(self) -> int:
        return self.states.shape[1]

    def to_csv(self, path) -> Path:
        """Write ``t,z1..zn,dz1..dzn`` with 17 significant digits."""
        path = Path(path)
        n = self.dim
        header = ["t"] + [f"z{i + 1}" for i in range(n)] + [f"dz{i + 1}" for i in range(n)]
        data = np.column_stack([self.times, self.states, self.derivs])
        with path.open("w", newline="") as fh:
            fh.write(",".join(header) + "\n")
            np.savetxt(fh, data, delimiter=",", fmt="%.17g")
        return path

    @classmethod
    def from_csv(cls, path) -> "Trajectory":
        with Path(path).open(newline="") as fh:
            rows = list(csv.reader(fh))
        header, body = rows[0], rows[1:]
        n = (len(header) - 1) // 2
        data = np.array([[float(v) for v in row] for row in body])
        return cls(data[:, 0], data[:, 1 : n + 1], data[:, n + 1 :], system_tag="csv")


def rk4(system: System, z0, t0: float, tf: float, h: float) -> Trajectory:
    """Classical fixed-step fourth-order Runge-Kutta.

    The grid is ``t0 + k*h`` for ``k = 0..N`` with ``N = round((tf - t0)/h)``.
    ``derivs[k]`` is the right-hand side at ``(t_k, z_k)``.  Raises
    ``IntegrationDiverged`` on the first non-finite state.
    """
    if not h > 0.0:
        raise ValueError("step h must be positive")
    if not tf >= t0:
        raise ValueError("tf must not precede t0")
    n_steps = int(round((tf - t0) / h))
    if n_steps > MAX_STEPS:
        raise ValueError(f"{n_steps} steps exceeds the limit of {MAX_STEPS}")
    z = np.array(z0, dtype=float)
    if z.shape != (system.state_dim,):
        raise DimensionError(f"initial state must have dimension {system.state_dim}, got {z.shape}")
    f = system.rhs
    times = t0 + h * np.arange(n_steps + 1)
    states = np.empty((n_steps + 1, z.size))
    derivs = np.empty_like(states)
    states[0] = z
    half, sixth = 0.5 * h, h / 6.0
    isfinite = math.isfinite
    # overflow is reported through IntegrationDiverged, not floating-point warnings
    with np.errstate(over="ignore", invalid="ignore"):
        for i in range(n_steps):
            t = times[i]
            k1 = f(t, z)
            k2 = f(t + half, z + half * k1)
            k3 = f(t + half, z + half * k2)
            k4 = f(t + h, z + h * k3)
            derivs[i] = k1
            z = z + sixth * (k1 + 2.0 * (k2 + k3) + k4)
            if not isfinite(z.sum()):
                raise IntegrationDiverged(float(times[i + 1]))
            states[i + 1] = z
        derivs[-1] = f(times[-1], z)
    return Trajectory(times, states, derivs, getattr(system, "tag", ""))


def rk4_batch(system: System, z0s, t0: float, tf: float, h: float) -> list[Trajectory]:
    """``rk4`` for many initial states at once.

    Needs a right-hand side that broadcasts over a trailing batch axis, as the
    scalar ORM and CRM systems do.  Every trajectory shares the same grid, so
    one non-finite state aborts the whole batch.
    """
    if not h > 0.0:
        raise ValueError("step h must be positive")
    if not tf >= t0:
        raise ValueError("tf must not precede t0")
    n_steps = int(round((tf - t0) / h))
    if n_steps > MAX_STEPS:
        raise ValueError(f"{n_steps} steps exceeds the limit of {MAX_STEPS}")
    z = np.array(z0s, dtype=float).T
    if z.ndim != 2 or z.shape[0] != system.state_dim:
        raise DimensionError(f"initial states must have shape (M, {system.state_dim})")
    f = system.rhs
    times = t0 + h * np.arange(n_steps + 1)
    states = np.empty((n_steps + 1,) + z.shape)
    derivs = np.empty_like(states)
    states[0] = z
    half, sixth = 0.5 * h, h / 6.0
    with np.errstate(over="ignore", invalid="ignore"):
        for i in range(n_steps):
            t = times[i]
            k1 = f(t, z)
            k2 = f(t + half, z + half * k1)
            k3 = f(t + half, z + half * k2)
            k4 = f(t + h, z + h * k3)
            derivs[i] = k1
            z = z + sixth * (k1 + 2.0 * (k2 + k3) + k4)
            if not math.isfinite(z.sum()):
                raise IntegrationDiverged(float(times[i + 1]))
            states[i + 1] = z
        derivs[-1] = f(times[-1], z)
    tag = getattr(system, "tag", "")
    return [Trajectory(times, states[:, :, j], derivs[:, :, j], tag) for j in range(z.shape[1])]


@dataclass(frozen=True)
class SettlingReport:
    """Settling result for one trajectory.

    ``t_settle`` is an absolute time; ``elapsed`` is measured from ``t0``.
    ``nu_hat = -ln(c)/elapsed`` is infinite when the trajectory starts settled.
    """

    t_settle: float
    c: float
    initial_dist: float
    nu_hat: float
    settled: bool = True
    t0: float = 0.0
    error: str | None = None

    @property
    def elapsed(self) -> float:
        return self.t_settle - self.t0

    @property
    def instant(self) -> bool:
        return self.settled and self.elapsed == 0.0

    def to_dict(self) -> dict:
        return {
            "t_settle": self.t_settle if self.settled else None,
            "elapsed": self.elapsed if self.settled else None,
            "c": self.c,
            "initial_dist": self.initial_dist,
            "nu_hat": None if not self.settled or math.isinf(self.nu_hat) else self.nu_hat,
            "settled": self.settled,
            "status": self.status,
        }

    @property
    def status(self) -> str:
        if self.error:
            return self.error
        if not self.settled:
            return "not settled"
        return "settled at t0" if self.instant else "settled"


def settling_time(traj: Trajectory, z_inf, fraction: float) -> SettlingReport:
    """Earliest grid time after which ``||z - z_inf||`` stays within
    ``fraction`` of its initial value for the rest of the trajectory."""
    if not 0.0 < fraction < 1.0:
        raise ValueError("fraction must lie in (0, 1)")
    if len(traj) == 0:
        raise ValueError("empty trajectory")
    dist = np.linalg.norm(traj.states - np.asarray(z_inf, dtype=float), axis=1)
    t0 = float(traj.times[0])
    d0 = float(dist[0])
    outside = np.flatnonzero(dist > fraction * d0)
    if outside.size == 0:
        return SettlingReport(t0, fraction, d0, math.inf, True, t0)
    k = outside[-1] + 1
    if k >= len(traj):
        return SettlingReport(math.nan, fraction, d0, math.nan, False, t0)
    t_settle = float(traj.times[k])
    return SettlingReport(t_settle, fraction, d0, -math.log(fraction) / (t_settle - t0), True, t0)


def lyapunov_series(traj: Trajectory, system: System) -> np.ndarray:
    """Rows of ``(t, V, Vdot)`` sampled along ``traj``."""
    if traj.system_tag != system.tag:
        raise TagMismatch(f"trajectory tag {traj.system_tag!r} does not match system {system.tag!r}")
    out = np.empty((len(traj), 3))
    out[:, 0] = traj.times
    for i, (t, z) in enumerate(zip(traj.times, traj.states)):
        out[i, 1] = system.lyapunov(z)
        out[i, 2] = system.vdot(t, z)[0]
    return out


def is_nonincreasing(series: np.ndarray, rtol: float = TOL.vdot) -> bool:
    v = series[:, 1]
    return bool(np.all(np.diff(v) <= rtol * abs(v[0])))


def decay_rate_scan(
    system: System,
    z0_list,
    fraction: float,
    horizon: float = 50.0,
    h: float = 1e-3,
    t0: float = 0.0,
    z_inf=None,
) -> list[SettlingReport]:
    """Settling report per initial condition at a fixed contraction ``fraction``.

    Divergent entries come back with ``settled=False`` and an ``error`` string;
    the rest of the batch still runs.
    """
    target = equilibrium(system) if z_inf is None else np.asarray(z_inf, dtype=float)
    reports = []
    for z0 in z0_list:
        try:
            traj = rk4(system, z0, t0, t0 + horizon, h)
        except IntegrationDiverged as exc:
            d0 = float(np.linalg.norm(np.asarray(z0, dtype=float) - target))
            reports.append(SettlingReport(math.nan, fraction, d0, math.nan, False, t0, str(exc)))
            continue
        reports.append(settling_time(traj, target, fraction))
    return reports
