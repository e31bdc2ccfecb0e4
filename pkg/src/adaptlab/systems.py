"""Adaptive systems as right-hand-side evaluators.

Four systems are modeled, each in error coordinates:

* ``AlgebraicIdSystem``: gradient identifier, state ``phi`` with
  ``phi' = -u u^T phi``.
* ``MracSystem``: vector MRAC, state ``z = [e, phi]`` with
  ``e' = A e + B x^T phi`` and ``phi' = -x C^T e``, ``C = P B``.
* ``OrmScalar``: scalar open-loop reference model, ``z = [e, phi]``.
* ``CrmScalar``: scalar closed-loop reference model, ``z = [x_m, e, phi]``.

``LinearSystem`` (``z' = A z``) is included as an exponentially stable control
case for the settling-time diagnostics.
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import expm

from .numerics import NumericsError, as_matrix, as_vector, is_symmetric, solve_lyapunov


class ModelError(ValueError):
    """Invalid system definition or state."""


class DimensionError(ModelError):
    """State vector does not match the system dimension."""


# ---------------------------------------------------------------------------
# signals


@dataclass(frozen=True)
class Constant:
    value: float

    kind = "constant"

    def __call__(self, t: float) -> float:
        return self.value

    @property
    def sup_norm(self) -> float:
        return abs(self.value)

    def to_dict(self) -> dict:
        return {"type": "constant", "value": self.value}


@dataclass(frozen=True)
class SinusoidSum:
    """Sum of ``amplitude * sin(omega * t + phase)`` terms, ``omega`` in rad/s."""

    terms: tuple[tuple[float, float, float], ...]

    kind = "sinusoid_sum"

    def __post_init__(self):
        terms = tuple(tuple(float(v) for v in term) for term in self.terms)
        if not terms or any(len(term) != 3 for term in terms):
            raise ModelError("sinusoid_sum needs (amplitude, frequency, phase) triples")
        object.__setattr__(self, "terms", terms)

    def __call__(self, t: float) -> float:
        if len(self.terms) == 1:
            amp, w, ph = self.terms[0]
            return amp * math.sin(w * t + ph)
        return sum(amp * math.sin(w * t + ph) for amp, w, ph in self.terms)

    @property
    def sup_norm(self) -> float:
        return sum(abs(amp) for amp, _, _ in self.terms)

    def to_dict(self) -> dict:
        return {"type": "sinusoid_sum", "terms": [list(term) for term in self.terms]}


@dataclass(frozen=True)
class PiecewiseConstant:
    """``values[0]`` before ``breakpoints[0]``, ``values[k]`` on ``[breakpoints[k-1], breakpoints[k])``."""

    breakpoints: tuple[float, ...]
    values: tuple[float, ...]

    kind = "piecewise_constant"

    def __post_init__(self):
        bp = tuple(float(b) for b in self.breakpoints)
        vals = tuple(float(v) for v in self.values)
        if len(vals) != len(bp) + 1:
            raise ModelError("piecewise_constant needs len(values) == len(breakpoints) + 1")
        if any(b1 >= b2 for b1, b2 in zip(bp, bp[1:])):
            raise ModelError("breakpoints must be strictly increasing")
        object.__setattr__(self, "breakpoints", bp)
        object.__setattr__(self, "values", vals)

    def __call__(self, t: float) -> float:
        return self.values[bisect.bisect_right(self.breakpoints, t)]

    @property
    def sup_norm(self) -> float:
        return max(abs(v) for v in self.values)

    def to_dict(self) -> dict:
        return {
            "type": "piecewise_constant",
            "breakpoints": list(self.breakpoints),
            "values": list(self.values),
        }


Signal = Constant | SinusoidSum | PiecewiseConstant


def signal_from_dict(spec) -> Signal:
    if isinstance(spec, (int, float)):
        return Constant(float(spec))
    if callable(spec):
        raise ModelError("arbitrary callables are not accepted as signals")
    try:
        kind = spec["type"]
    except (TypeError, KeyError):
        raise ModelError(f"signal spec needs a 'type' field: {spec!r}") from None
    if kind == "constant":
        return Constant(float(spec["value"]))
    if kind == "sinusoid_sum":
        return SinusoidSum(tuple(tuple(term) for term in spec["terms"]))
    if kind == "piecewise_constant":
        return PiecewiseConstant(tuple(spec["breakpoints"]), tuple(spec["values"]))
    raise ModelError(f"unknown signal type {kind!r}")


def _check_signal(s) -> Signal:
    if not isinstance(s, (Constant, SinusoidSum, PiecewiseConstant)):
        raise ModelError(f"unsupported signal {s!r}; use Constant, SinusoidSum or PiecewiseConstant")
    return s


# ---------------------------------------------------------------------------
# systems


def _check_dim(z, n: int, kind: str) -> np.ndarray:
    z = np.asarray(z, dtype=float)
    if z.shape != (n,):
        raise DimensionError(f"{kind} state must have dimension {n}, got shape {z.shape}")
    return z


@dataclass(frozen=True, eq=False)
class LinearSystem:
    A: np.ndarray

    kind = "linear"

    def __post_init__(self):
        A = as_matrix(self.A, "A")
        if A.shape[0] != A.shape[1]:
            raise ModelError("A must be square")
        object.__setattr__(self, "A", A)

    @property
    def state_dim(self) -> int:
        return self.A.shape[0]

    @property
    def tag(self) -> str:
        return f"linear:{self.A.tolist()}"

    def rhs(self, t, z):
        return self.A @ z

    def equilibrium(self):
        return np.zeros(self.state_dim)

    def lyapunov(self, z):
        return float(z @ z)

    def vdot(self, t, z):
        actual = float(2.0 * z @ (self.A @ z))
        sym = 0.5 * (self.A + self.A.T)
        bound = float(2.0 * np.max(np.linalg.eigvalsh(sym)) * (z @ z))
        return actual, bound


@dataclass(frozen=True, eq=False)
class AlgebraicIdSystem:
    """Parameter error of the gradient identifier ``y = u^T theta``."""

    u: tuple[Signal, ...]
    theta_true: np.ndarray | None = None

    kind = "algebraic"

    def __post_init__(self):
        u = tuple(_check_signal(s) for s in self.u)
        if not u:
            raise ModelError("input u needs at least one component")
        object.__setattr__(self, "u", u)
        if self.theta_true is not None:
            th = as_vector(self.theta_true, "theta")
            if th.size != len(u):
                raise ModelError("theta and u dimensions differ")
            object.__setattr__(self, "theta_true", th)

    @property
    def state_dim(self) -> int:
        return len(self.u)

    @property
    def tag(self) -> str:
        return f"algebraic:{[s.to_dict() for s in self.u]}"

    @property
    def u_max(self) -> float:
        """Closed-form bound on ``||u(t)||``."""
        return math.sqrt(sum(s.sup_norm**2 for s in self.u))

    def input(self, t: float) -> np.ndarray:
        return np.array([s(t) for s in self.u])

    def rhs(self, t, z):
        u = self.input(t)
        return -u * (u @ z)

    def equilibrium(self):
        return np.zeros(self.state_dim)

    def lyapunov(self, z):
        return 0.5 * float(z @ z)

    def vdot(self, t, z):
        u = self.input(t)
        actual = float(z @ self.rhs(t, z))
        return actual, -float(u @ z) ** 2


@dataclass(frozen=True, eq=False)
class MracSystem:
    """Single-input vector MRAC in error coordinates ``z = [e, phi]``.

    ``P`` and ``C = P B`` are derived from ``A`` and ``Q``.  The reference
    state ``x_m`` is evaluated in closed form from ``r``; with ``xm0=None`` it
    starts on the forced (steady-state) response so no transient is present.
    """

    A: np.ndarray
    B: np.ndarray
    Q: np.ndarray
    r: Signal
    theta_true: np.ndarray | None = None
    xm0: np.ndarray | None = None
    t0: float = 0.0
    P: np.ndarray = field(init=False, repr=False)
    C: np.ndarray = field(init=False, repr=False)

    kind = "mrac"

    def __post_init__(self):
        A = as_matrix(self.A, "A")
        n = A.shape[0]
        B = np.asarray(self.B, dtype=float)
        if B.ndim == 2 and B.shape[1] != 1:
            raise ModelError(f"B must be a single column, got shape {B.shape}; only single-input plants are supported")
        B = as_vector(B.reshape(-1), "B")
        Q = as_matrix(self.Q, "Q")
        if A.shape != (n, n) or B.size != n or Q.shape != (n, n):
            raise ModelError(f"inconsistent shapes A{A.shape} B{B.shape} Q{Q.shape}")
        if not is_symmetric(Q):
            raise ModelError("Q must be symmetric")
        _check_signal(self.r)
        try:
            P = solve_lyapunov(A, Q)
        except NumericsError as exc:
            raise ModelError(str(exc)) from None
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "Q", Q)
        object.__setattr__(self, "P", P)
        object.__setattr__(self, "C", P @ B)
        if self.theta_true is not None:
            object.__setattr__(self, "theta_true", as_vector(self.theta_true, "theta"))
        if self.xm0 is not None:
            xm0 = as_vector(self.xm0, "xm0")
            if xm0.size != n:
                raise ModelError("xm0 dimension mismatch")
            object.__setattr__(self, "xm0", xm0)
        # forced-response phasors, so reference_state avoids a solve per call
        eye = np.eye(n)
        if isinstance(self.r, SinusoidSum):
            phasors = [(np.linalg.solve(1j * w * eye - A, B * amp), w, ph) for amp, w, ph in self.r.terms]
        else:
            phasors = []
        object.__setattr__(self, "_phasors", phasors)
        object.__setattr__(self, "_unit_dc", -np.linalg.solve(A, B))

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def state_dim(self) -> int:
        return 2 * self.n

    @property
    def tag(self) -> str:
        return f"mrac:{self.A.tolist()}:{self.B.tolist()}:{self.Q.tolist()}:{self.r.to_dict()}"

    def _forced(self, t: float, value: float | None = None) -> np.ndarray:
        """Particular solution of ``x' = A x + B r`` (constant or sinusoidal r)."""
        if value is not None:
            return self._unit_dc * value
        if isinstance(self.r, Constant):
            return self._unit_dc * self.r.value
        out = np.zeros(self.n)
        for X, w, ph in self._phasors:
            out += np.imag(X * np.exp(1j * (w * t + ph)))
        return out

    def reference_state(self, t: float) -> np.ndarray:
        r = self.r
        if isinstance(r, PiecewiseConstant):
            return self._reference_piecewise(t)
        xp = self._forced(t)
        if self.xm0 is None:
            return xp
        return xp + expm(self.A * (t - self.t0)) @ (self.xm0 - self._forced(self.t0))

    def _reference_piecewise(self, t: float) -> np.ndarray:
        r = self.r
        knots = [b for b in r.breakpoints if b > self.t0]
        x = self.xm0 if self.xm0 is not None else self._forced(self.t0, r(self.t0))
        start = self.t0
        for b in knots:
            if t < b:
                break
            xs = self._forced(start, r(start))
            x = xs + expm(self.A * (b - start)) @ (x - xs)
            start = b
        xs = self._forced(start, r(start))
        return xs + expm(self.A * (t - start)) @ (x - xs)

    def split(self, z):
        return z[: self.n], z[self.n :]

    def plant_state(self, t, z):
        return z[: self.n] + self.reference_state(t)

    def rhs(self, t, z):
        e, phi = self.split(z)
        x = e + self.reference_state(t)
        return np.concatenate([self.A @ e + self.B * (x @ phi), -x * (self.C @ e)])

    def equilibrium(self):
        return np.zeros(self.state_dim)

    def lyapunov(self, z):
        e, phi = self.split(z)
        return float(e @ self.P @ e + phi @ phi)

    def vdot(self, t, z):
        e, phi = self.split(z)
        de, dphi = self.split(self.rhs(t, z))
        actual = float(2.0 * e @ self.P @ de + 2.0 * phi @ dphi)
        return actual, -float(e @ self.Q @ e)


@dataclass(frozen=True)
class OrmScalar:
    """Scalar open-loop reference model with ``x_m(t) = xbar``; state ``(e, phi)``."""

    a: float
    b: float
    gamma: float
    rbar: float

    kind = "orm"

    def __post_init__(self):
        _validate_scalar(self.a, self.b, self.gamma, self.rbar)
        if self.xbar <= 0.0:
            raise ModelError("xbar = -b*rbar/a must be positive (rbar > 0)")

    @property
    def xbar(self) -> float:
        return -self.b * self.rbar / self.a

    state_dim = 2

    @property
    def tag(self) -> str:
        return f"orm:{self.a}:{self.b}:{self.gamma}:{self.rbar}"

    def rhs(self, t, z):
        e, phi = z
        x = e + self.xbar
        return np.array([self.a * e + self.b * phi * x, -self.gamma * e * x])

    def equilibrium(self):
        return np.zeros(2)

    def lyapunov(self, z):
        e, phi = z
        return float(e * e + phi * phi / self.gamma)

    def vdot(self, t, z):
        e, phi = z
        de, dphi = self.rhs(t, z)
        return float(2.0 * e * de + 2.0 * phi * dphi / self.gamma), 2.0 * self.a * e * e


@dataclass(frozen=True)
class CrmScalar:
    """Scalar closed-loop reference model; state ``(x_m, e, phi)``."""

    a: float
    b: float
    gamma: float
    ell: float
    rbar: float

    kind = "crm"

    def __post_init__(self):
        _validate_scalar(self.a, self.b, self.gamma, self.rbar)
        if not self.ell < 0.0:
            raise ModelError("ell must be negative")
        if self.xbar <= 0.0:
            raise ModelError("xbar = -b*rbar/a must be positive (rbar > 0)")

    @property
    def xbar(self) -> float:
        return -self.b * self.rbar / self.a

    state_dim = 3

    @property
    def tag(self) -> str:
        return f"crm:{self.a}:{self.b}:{self.gamma}:{self.ell}:{self.rbar}"

    def rhs(self, t, z):
        xm, e, phi = z
        x = e + xm
        return np.array(
            [
                self.a * xm + self.b * self.rbar - self.ell * e,
                (self.a + self.ell) * e + self.b * phi * x,
                -self.gamma * e * x,
            ]
        )

    def equilibrium(self):
        return np.array([self.xbar, 0.0, 0.0])

    def lyapunov(self, z):
        _, e, phi = z
        return float(e * e + phi * phi / self.gamma)

    def vdot(self, t, z):
        _, e, phi = z
        _, de, dphi = self.rhs(t, z)
        actual = float(2.0 * e * de + 2.0 * phi * dphi / self.gamma)
        return actual, 2.0 * (self.a + self.ell) * e * e


def _validate_scalar(a, b, gamma, rbar):
    for name, v in (("a", a), ("b", b), ("gamma", gamma), ("rbar", rbar)):
        if not math.isfinite(v):
            raise ModelError(f"{name} must be finite")
    if not a < 0.0:
        raise ModelError("a must be negative")
    if not b > 0.0:
        raise ModelError("b must be positive")
    if not gamma > 0.0:
        raise ModelError("gamma must be positive")
    if rbar == 0.0:
        raise ModelError("rbar must be non-zero")


System = LinearSystem | AlgebraicIdSystem | MracSystem | OrmScalar | CrmScalar


# ---------------------------------------------------------------------------
# functional surface


def rhs(system: System, t: float, z) -> np.ndarray:
    z = _check_dim(z, system.state_dim, system.kind)
    return system.rhs(t, z)


def equilibrium(system: System) -> np.ndarray:
    return system.equilibrium()


def lyapunov_value(system: System, z) -> float:
    z = _check_dim(z, system.state_dim, system.kind)
    return system.lyapunov(z)


def vdot_bound(system: System, z, t: float = 0.0) -> tuple[float, float]:
    """``(vdot_actual, vdot_bound)`` at ``(t, z)``.

    ``vdot_actual`` is the chain-rule derivative of the Lyapunov function along
    the vector field; ``vdot_bound`` is the analytic upper bound (``2 a e^2``
    for ORM, ``2 (a + ell) e^2`` for CRM, ``-e^T Q e`` for MRAC).
    """
    z = _check_dim(z, system.state_dim, system.kind)
    return system.vdot(t, z)


# ---------------------------------------------------------------------------
# JSON config


def system_from_dict(spec: dict) -> System:
    """Build a system from its plain JSON form.

    Field names: ``kind, a, b, gamma, ell, rbar, A, B, Q, theta, signal`` (plus
    optional ``xm0`` for MRAC).
    """
    try:
        kind = spec["kind"]
    except (TypeError, KeyError):
        raise ModelError("system spec needs a 'kind' field") from None

    def num(name):
        if name not in spec:
            raise ModelError(f"missing field {name!r}")
        v = spec[name]
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise ModelError(f"field {name!r} must be a number")
        return float(v)

    try:
        if kind == "orm":
            return OrmScalar(num("a"), num("b"), num("gamma"), num("rbar"))
        if kind == "crm":
            return CrmScalar(num("a"), num("b"), num("gamma"), num("ell"), num("rbar"))
        if kind == "mrac":
            return MracSystem(
                A=np.asarray(spec["A"], dtype=float),
                B=np.asarray(spec["B"], dtype=float),
                Q=np.asarray(spec["Q"], dtype=float),
                r=signal_from_dict(spec["signal"]),
                theta_true=spec.get("theta"),
                xm0=spec.get("xm0"),
            )
        if kind == "algebraic":
            sig = spec["signal"]
            if isinstance(sig, dict):
                sig = [sig]
            return AlgebraicIdSystem(tuple(signal_from_dict(s) for s in sig), spec.get("theta"))
        if kind == "linear":
            return LinearSystem(np.asarray(spec["A"], dtype=float))
    except KeyError as exc:
        raise ModelError(f"missing field {exc.args[0]!r}") from None
    except (NumericsError, TypeError, ValueError) as exc:
        if isinstance(exc, ModelError):
            raise
        raise ModelError(str(exc)) from None
    raise ModelError(f"unknown system kind {kind!r}")


def system_to_dict(system: System) -> dict:
    if isinstance(system, OrmScalar):
        return {"kind": "orm", "a": system.a, "b": system.b, "gamma": system.gamma, "rbar": system.rbar}
    if isinstance(system, CrmScalar):
        return {
            "kind": "crm",
            "a": system.a,
            "b": system.b,
            "gamma": system.gamma,
            "ell": system.ell,
            "rbar": system.rbar,
        }
    if isinstance(system, MracSystem):
        out = {
            "kind": "mrac",
            "A": system.A.tolist(),
            "B": system.B.tolist(),
            "Q": system.Q.tolist(),
            "signal": system.r.to_dict(),
        }
        if system.theta_true is not None:
            out["theta"] = system.theta_true.tolist()
        if system.xm0 is not None:
            out["xm0"] = system.xm0.tolist()
        return out
    if isinstance(system, AlgebraicIdSystem):
        out = {"kind": "algebraic", "signal": [s.to_dict() for s in system.u]}
        if system.theta_true is not None:
            out["theta"] = system.theta_true.tolist()
        return out
    if isinstance(system, LinearSystem):
        return {"kind": "linear", "A": system.A.tolist()}
    raise ModelError(f"cannot serialize {system!r}")


def example_parameters() -> dict:
    """Parameter set used by the reproduction recipes."""
    return {"a": -1.0, "b": 1.0, "gamma": 1.0, "ell": -1.0, "rbar": 3.0}


def orm_example(**overrides) -> OrmScalar:
    p = example_parameters() | overrides
    return OrmScalar(p["a"], p["b"], p["gamma"], p["rbar"])


def crm_example(**overrides) -> CrmScalar:
    p = example_parameters() | overrides
    return CrmScalar(p["a"], p["b"], p["gamma"], p["ell"], p["rbar"])


def sincos_identifier() -> AlgebraicIdSystem:
    """Identifier driven by ``u(t) = (sin t, cos t)``."""
    return AlgebraicIdSystem((SinusoidSum(((1.0, 1.0, 0.0),)), SinusoidSum(((1.0, 1.0, math.pi / 2),))))
