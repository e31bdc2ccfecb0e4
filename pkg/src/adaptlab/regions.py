"""Surfaces, invariant regions and slow-convergence diagnostics for the scalar
ORM and CRM adaptive systems with constant reference ``rbar``.

ORM states are ``(e, phi)``; CRM states are ``(x_m, e, phi)``.  Region
inequalities are evaluated exactly as defined (strict where strict); the
relaxation ``tol`` is only used by the invariance check.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np
from scipy.stats import qmc

from .integrate import Trajectory
from .numerics import TOL
from .systems import CrmScalar, OrmScalar


class Region(str, Enum):
    M1 = "M1"
    M2 = "M2"
    M3 = "M3"
    M0_BOUNDARY = "M0_boundary"
    OUTSIDE = "Outside"

    @property
    def in_m0(self) -> bool:
        return self in (Region.M1, Region.M2, Region.M3)


class Surface(str, Enum):
    S1 = "S1"
    S2 = "S2"
    S3 = "S3"
    S4 = "S4"
    S5 = "S5"


class DomainError(ValueError):
    pass


Scalar = OrmScalar | CrmScalar


def _surface(s) -> Surface:
    return s if isinstance(s, Surface) else Surface(str(s).upper())


# ---------------------------------------------------------------------------
# closed-form faces


def orm_upper(sys: OrmScalar, phi):
    """Upper face of ORM M1: ``e = (a - b phi) xbar / (a + b phi)``."""
    a, b = sys.a, sys.b
    return (a - b * phi) * sys.xbar / (a + b * phi)


def crm_ratio(sys: CrmScalar, phi):
    """``(a + ell - b phi) / (a + ell + b phi)``; CRM M1 upper face is ``e = x_m * ratio``."""
    al = sys.a + sys.ell
    return (al - sys.b * phi) / (al + sys.b * phi)


def crm_ratio_printed(sys: CrmScalar, phi):
    """The reciprocal arrangement ``(a + ell + b phi) / (a + ell - b phi)``."""
    al = sys.a + sys.ell
    return (al + sys.b * phi) / (al - sys.b * phi)


def surface_point(sys: Scalar, surface, phi: float, *, xm: float | None = None, printed: bool = False) -> np.ndarray:
    """Point on ``surface`` at parameter error ``phi``.

    ORM returns ``(e, phi)``; CRM returns ``(x_m, e, phi)`` with ``x_m`` fixed
    to ``xbar`` on S1-S4 unless given.  CRM S5 solves the ``e' = 0`` locus
    jointly with ``x_m' = 0``.  ``printed=True`` selects the alternative CRM
    closed forms for S1 and S5 that use ``(a+ell+b phi)/(a+ell-b phi)`` and
    ``a + b phi`` respectively.
    """
    surface = _surface(surface)
    phi = float(phi)
    if isinstance(sys, OrmScalar):
        return _orm_surface_point(sys, surface, phi)
    if isinstance(sys, CrmScalar):
        return _crm_surface_point(sys, surface, phi, sys.xbar if xm is None else float(xm), printed)
    raise TypeError(f"regions are defined for OrmScalar and CrmScalar, not {type(sys).__name__}")


def _orm_surface_point(sys: OrmScalar, surface: Surface, phi: float) -> np.ndarray:
    a, b, xbar = sys.a, sys.b, sys.xbar
    if surface is Surface.S1:
        return np.array([-xbar, phi])
    if surface is Surface.S2:
        if not phi < a / b:
            raise DomainError(f"ORM S2 needs phi < a/b = {a / b:g}, got {phi:g}")
        return np.array([orm_upper(sys, phi), phi])
    if surface is Surface.S3:
        if not a / b <= phi < 0.0:
            raise DomainError(f"ORM S3 needs a/b = {a / b:g} <= phi < 0, got {phi:g}")
        return np.array([0.0, phi])
    if surface is Surface.S5:
        if a + b * phi == 0.0:
            raise DomainError(f"ORM S5 is singular at phi = -a/b = {-a / b:g}")
        return np.array([-xbar * b * phi / (a + b * phi), phi])
    raise DomainError(f"surface {surface.value} is not defined for the ORM system")


def _crm_surface_point(sys: CrmScalar, surface: Surface, phi: float, xm: float, printed: bool) -> np.ndarray:
    a, b, ell, rbar, xbar = sys.a, sys.b, sys.ell, sys.rbar, sys.xbar
    al = a + ell
    if surface is Surface.S5:
        denom = (a if printed else al) + b * phi
        if denom == 0.0:
            raise DomainError(f"CRM S5 is singular at phi = {-(a if printed else al) / b:g}")
        k = -b * phi / denom
        if a - ell * k == 0.0:
            raise DomainError(f"CRM S5 has no finite intersection at phi = {phi:g}")
        x_m = -b * rbar / (a - ell * k)
        return np.array([x_m, k * x_m, phi])
    if surface is Surface.S1:
        if printed:
            if al - b * phi == 0.0:
                raise DomainError(f"CRM S1 (printed form) is singular at phi = (a+ell)/b = {al / b:g}")
            if not phi < al / b:
                raise DomainError(f"CRM S1 needs phi < (a+ell)/b = {al / b:g}, got {phi:g}")
            return np.array([xm, xm * crm_ratio_printed(sys, phi), phi])
        if not phi < al / b:
            raise DomainError(f"CRM S1 needs phi < (a+ell)/b = {al / b:g} (excluded value), got {phi:g}")
        return np.array([xm, xm * crm_ratio(sys, phi), phi])
    if surface is Surface.S2:
        if not phi < 0.0:
            raise DomainError(f"CRM S2 needs phi < 0, got {phi:g}")
        return np.array([xm, -xm, phi])
    if surface is Surface.S3:
        if not al / b <= phi < 0.0:
            raise DomainError(f"CRM S3 needs (a+ell)/b = {al / b:g} <= phi < 0, got {phi:g}")
        return np.array([xm, 0.0, phi])
    if surface is Surface.S4:
        rad = xbar * xbar - phi * phi / sys.gamma
        if rad < 0.0:
            raise DomainError(f"CRM S4 needs |phi| <= sqrt(gamma)*xbar, got {phi:g}")
        return np.array([xm, -math.sqrt(rad), phi])
    raise DomainError(f"surface {surface.value} is not defined for the CRM system")


# ---------------------------------------------------------------------------
# membership


def _cmp(closed: bool, tol: float):
    lt = (lambda u, v: u <= v + tol) if closed else (lambda u, v: u < v + tol)
    le = lambda u, v: u <= v + tol  # noqa: E731
    return lt, le


def _orm_regions(sys: OrmScalar, z: np.ndarray, tol: float, closed: bool):
    e, phi = z[..., 0], z[..., 1]
    a, b, xbar, g = sys.a, sys.b, sys.xbar, sys.gamma
    lt, le = _cmp(closed, tol)
    m3 = lt(e * e + phi * phi / g, xbar * xbar)
    below = a + b * phi < 0.0
    with np.errstate(divide="ignore", invalid="ignore"):
        upper = np.where(below, orm_upper(sys, phi), np.inf)
    m1 = lt(phi, a / b) & below & lt(-xbar, e) & lt(e, upper)
    m2 = le(a / b, phi) & lt(phi, 0.0) & lt(-xbar, e) & lt(e, 0.0)
    return m1, m2, m3


def _crm_regions(sys: CrmScalar, z: np.ndarray, tol: float, closed: bool):
    xm, e, phi = z[..., 0], z[..., 1], z[..., 2]
    a, b, ell, rbar, xbar, g = sys.a, sys.b, sys.ell, sys.rbar, sys.xbar, sys.gamma
    al = a + ell
    lt, le = _cmp(closed, tol)
    xm_ok = le(b * rbar / al, xm) & le(xm, xbar)
    m3 = le(e * e + phi * phi / g, xbar * xbar) & le(0.0, xm) & le(xm, 2.0 * xbar)
    below = al + b * phi < 0.0
    with np.errstate(divide="ignore", invalid="ignore"):
        upper = np.where(below, xm * crm_ratio(sys, phi), np.inf)
    m1 = lt(phi, al / b) & below & xm_ok & le(-xm, e) & le(e, upper)
    m2 = le(al / b, phi) & lt(phi, 0.0) & xm_ok & le(-xm, e) & le(e, 0.0)
    return m1, m2, m3


def _regions(sys: Scalar, z, tol=0.0, closed=False):
    z = np.asarray(z, dtype=float)
    if z.shape[-1:] != (sys.state_dim,):
        raise ValueError(f"state must have dimension {sys.state_dim}")
    if isinstance(sys, OrmScalar):
        return _orm_regions(sys, z, tol, closed)
    if isinstance(sys, CrmScalar):
        return _crm_regions(sys, z, tol, closed)
    raise TypeError(f"regions are defined for OrmScalar and CrmScalar, not {type(sys).__name__}")


def classify(sys: Scalar, z) -> Region:
    """First matching region in the order M3, M1, M2.

    Points in the closure of M0 but in none of the regions are
    ``M0_BOUNDARY``; everything else is ``OUTSIDE``.
    """
    m1, m2, m3 = (bool(m) for m in _regions(sys, z))
    if m3:
        return Region.M3
    if m1:
        return Region.M1
    if m2:
        return Region.M2
    scale = max(1.0, float(np.max(np.abs(z))))
    if any(bool(m) for m in _regions(sys, z, tol=1e-12 * scale, closed=True)):
        return Region.M0_BOUNDARY
    return Region.OUTSIDE


def in_m0(sys: Scalar, z, tol: float = 0.0) -> bool:
    return bool(in_m0_mask(sys, np.asarray(z, dtype=float)[None, :], tol)[0])


def in_m0_mask(sys: Scalar, states, tol: float = 0.0) -> np.ndarray:
    """Row-wise M0 membership for an ``(N, dim)`` array of states."""
    m1, m2, m3 = _regions(sys, states, tol=tol, closed=tol > 0.0)
    return m1 | m2 | m3


# ---------------------------------------------------------------------------
# bounds


def dz_bound(sys: Scalar) -> float:
    """Largest state-velocity norm over M0."""
    xbar, g, b = sys.xbar, sys.gamma, sys.b
    if isinstance(sys, OrmScalar):
        e_rate = abs(sys.a * xbar) + 2.0 * abs(b * math.sqrt(g) * xbar**2)
        return math.hypot(e_rate, 2.0 * g * xbar**2)
    al = sys.a + sys.ell
    e_rate = abs(al * xbar) + 2.0 * b * math.sqrt(g) * xbar**2
    xm_rate = abs(al * xbar) + sys.rbar
    return math.sqrt(e_rate**2 + (2.0 * g * xbar**2) ** 2 + xm_rate**2)


def t_lower_bound(z0, c: float, d_z: float) -> float:
    """Minimum time to shrink ``||z||`` from ``||z0||`` to ``c*||z0||`` at speed ``<= d_z``."""
    if not 0.0 < c < 1.0:
        raise ValueError("c must lie in (0, 1)")
    if not d_z > 0.0:
        raise ValueError("d_z must be positive")
    return float(np.linalg.norm(np.asarray(z0, dtype=float))) * (1.0 - c) / d_z


@dataclass(frozen=True)
class BoundReport:
    d_z: float
    t_lower: float
    c: float
    z0_norm: float

    @classmethod
    def build(cls, sys: Scalar, z0, c: float) -> "BoundReport":
        d = dz_bound(sys)
        return cls(d, t_lower_bound(z0, c, d), c, float(np.linalg.norm(z0)))


# ---------------------------------------------------------------------------
# boundary flow


@dataclass(frozen=True)
class FlowCheck:
    surface: Surface
    min_inner_product: float
    argmin: np.ndarray
    n_samples: int
    degenerate: list = field(default_factory=list)


def _default_range(sys: Scalar, surface: Surface):
    if isinstance(sys, OrmScalar):
        a_b = sys.a / sys.b
        return {
            Surface.S1: (-100.0, 0.0),
            Surface.S2: (-100.0, a_b),
            Surface.S3: (a_b, 0.0),
        }[surface]
    al_b = (sys.a + sys.ell) / sys.b
    phi = {
        Surface.S1: (-100.0, al_b),
        Surface.S2: (-100.0, 0.0),
        Surface.S3: (al_b, 0.0),
    }[surface]
    return phi, (0.0, sys.xbar)


def _inward_normal(sys: Scalar, surface: Surface, z) -> np.ndarray:
    if isinstance(sys, OrmScalar):
        if surface is Surface.S1:
            return np.array([1.0, 0.0])
        if surface is Surface.S3:
            return np.array([-1.0, 0.0])
        a, b, phi = sys.a, sys.b, z[1]
        de_dphi = -2.0 * b * sys.xbar * a / (a + b * phi) ** 2
        return np.array([-1.0, de_dphi])
    if surface is Surface.S2:
        return np.array([1.0, 1.0, 0.0])
    if surface is Surface.S3:
        return np.array([0.0, -1.0, 0.0])
    # S1: e = x_m * R(phi); n = t_xm x t_phi with t_xm = (1, R, 0), t_phi = (0, x_m R', 1)
    xm, phi = z[0], z[2]
    al, b = sys.a + sys.ell, sys.b
    ratio = crm_ratio(sys, phi)
    d_ratio = -2.0 * b * al / (al + b * phi) ** 2
    return np.cross([1.0, ratio, 0.0], [0.0, xm * d_ratio, 1.0])


def boundary_flow_check(sys: Scalar, surface, n_samples: int = 1000, sample_range=None) -> FlowCheck:
    """Minimum of ``n_hat . z'`` over points sampled on a face of M0.

    ``n_hat`` points into M0.  ``sample_range`` is a ``(phi_lo, phi_hi)`` pair
    for ORM and ``((phi_lo, phi_hi), (xm_lo, xm_hi))`` for CRM; the upper
    ``phi`` end is excluded.  CRM samples use a scrambled Halton sequence.
    """
    surface = _surface(surface)
    if surface not in (Surface.S1, Surface.S2, Surface.S3):
        raise DomainError("boundary flow is checked on S1, S2 and S3 only")
    rng = sample_range if sample_range is not None else _default_range(sys, surface)
    if isinstance(sys, OrmScalar):
        lo, hi = rng
        points = [surface_point(sys, surface, phi) for phi in np.linspace(lo, hi, n_samples, endpoint=False)]
    else:
        (plo, phi_hi), (xlo, xhi) = rng
        u = qmc.Halton(d=2, scramble=True, seed=0).random(n_samples)
        phis = plo + (phi_hi - plo) * u[:, 0]
        xms = xlo + (xhi - xlo) * u[:, 1]
        points = [surface_point(sys, surface, p, xm=x) for p, x in zip(phis, xms)]
    best, arg, degenerate = math.inf, None, []
    for z in points:
        n = _inward_normal(sys, surface, z)
        norm = float(np.linalg.norm(n))
        if norm == 0.0 or not math.isfinite(norm):
            degenerate.append(z)
            continue
        val = float(n @ sys.rhs(0.0, z)) / norm
        if val < best:
            best, arg = val, z
    return FlowCheck(surface, best, arg, n_samples, degenerate)


# ---------------------------------------------------------------------------
# trajectories


@dataclass(frozen=True)
class InvarianceResult:
    entered_at: float | None
    violated_at: float | None

    @property
    def ok(self) -> bool:
        return self.violated_at is None


def invariance_check(traj: Trajectory, sys: Scalar, tol: float = TOL.boundary) -> InvarianceResult:
    """First sample inside M0 and the first later sample that leaves it.

    Inequalities are relaxed by ``tol`` (absolute) to absorb integration error.
    """
    inside = in_m0_mask(sys, traj.states, tol)
    hits = np.flatnonzero(inside)
    if hits.size == 0:
        return InvarianceResult(None, None)
    k = hits[0]
    exits = np.flatnonzero(~inside[k:])
    if exits.size:
        return InvarianceResult(float(traj.times[k]), float(traj.times[k + exits[0]]))
    return InvarianceResult(float(traj.times[k]), None)


def sample_m0(sys: Scalar, n: int, seed: int = 0, phi_floor: float = -50.0) -> np.ndarray:
    """Quasi-random points spread over M1, M2 and M3 (about a third each).

    M1 is unbounded below in ``phi``; it is truncated at ``phi_floor``.
    """
    u = qmc.Halton(d=3, scramble=True, seed=seed).random(n)
    u = np.clip(u, 1e-9, 1.0 - 1e-9)
    xbar, g, b = sys.xbar, sys.gamma, sys.b
    out = []
    if isinstance(sys, OrmScalar):
        top = sys.a / b
        for i, (u0, u1, _) in enumerate(u):
            part = i % 3
            if part == 0:
                phi = phi_floor + (top - phi_floor) * u0
                e = -xbar + (orm_upper(sys, phi) + xbar) * u1
            elif part == 1:
                phi = top * (1.0 - u0)
                e = -xbar * u1
            else:
                rad, ang = xbar * math.sqrt(u0), 2.0 * math.pi * u1
                e, phi = rad * math.cos(ang), math.sqrt(g) * rad * math.sin(ang)
            out.append((e, phi))
        return np.array(out)
    top = (sys.a + sys.ell) / b
    for i, (u0, u1, u2) in enumerate(u):
        part = i % 3
        if part == 0:
            phi = phi_floor + (top - phi_floor) * u0
            xm = xbar * u2
            e = -xm + xm * (crm_ratio(sys, phi) + 1.0) * u1
        elif part == 1:
            phi = top * (1.0 - u0)
            xm = xbar * u2
            e = -xm * u1
        else:
            rad, ang = xbar * math.sqrt(u0), 2.0 * math.pi * u1
            e, phi = rad * math.cos(ang), math.sqrt(g) * rad * math.sin(ang)
            xm = 2.0 * xbar * u2
        out.append((xm, e, phi))
    return np.array(out)


# ---------------------------------------------------------------------------
# slow convergence


@dataclass(frozen=True)
class StickingDiagnostic:
    phi0_values: np.ndarray
    phi_dot_abs: np.ndarray
    delta_values: np.ndarray
    probes: np.ndarray
    regions: list[Region]

    @property
    def monotone(self) -> bool:
        """``|phi'|`` strictly decreases as ``phi0`` becomes more negative."""
        order = np.argsort(-self.phi0_values)
        return bool(np.all(np.diff(self.phi_dot_abs[order]) < 0.0))

    def to_dict(self) -> dict:
        return {
            "phi0": self.phi0_values.tolist(),
            "phi_dot_abs": self.phi_dot_abs.tolist(),
            "delta": self.delta_values.tolist(),
            "probes": self.probes.tolist(),
            "regions": [r.value for r in self.regions],
            "monotone": self.monotone,
        }


def sticking_scan(sys: Scalar, phi0_list) -> StickingDiagnostic:
    """Adaptation rate ``|phi'|`` at mid-band probes deep in M1.

    With ``Delta = 2 a xbar / (a + b phi0)`` the probe is ``e = -xbar + Delta/2``
    (CRM: at ``x_m = xbar``).  The rate is read from the vector field.
    """
    phis = np.asarray(phi0_list, dtype=float)
    a, b, xbar = sys.a, sys.b, sys.xbar
    top = a / b if isinstance(sys, OrmScalar) else (a + sys.ell) / b
    if np.any(phis >= top):
        raise DomainError(f"phi0 values must be < {top:g}")
    deltas = 2.0 * a * xbar / (a + b * phis)
    probes, rates, regions = [], [], []
    for phi, delta in zip(phis, deltas):
        e = -xbar + 0.5 * delta
        z = np.array([e, phi]) if isinstance(sys, OrmScalar) else np.array([xbar, e, phi])
        probes.append(z)
        rates.append(abs(sys.rhs(0.0, z)[-1]))
        regions.append(classify(sys, z))
    return StickingDiagnostic(phis, np.array(rates), deltas, np.array(probes), regions)


# ---------------------------------------------------------------------------
# export


def region_grid(sys: Scalar, e_range=None, phi_range=(-12.0, 1.0), n_e=101, n_phi=131, xm=None):
    """Region labels on an ``(phi, e)`` grid; CRM slices at ``x_m`` (default ``xbar``)."""
    if e_range is None:
        e_range = (-sys.xbar - 1.0, 1.0)
    rows = []
    for phi in np.linspace(*phi_range, n_phi):
        for e in np.linspace(*e_range, n_e):
            if isinstance(sys, OrmScalar):
                rows.append((phi, e, classify(sys, (e, phi)).value))
            else:
                x = sys.xbar if xm is None else xm
                rows.append((phi, e, x, classify(sys, (x, e, phi)).value))
    return rows


def write_region_csv(path, sys: Scalar, rows) -> Path:
    path = Path(path)
    header = ["phi", "e", "region"] if isinstance(sys, OrmScalar) else ["phi", "e", "xm", "region"]
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([f"{v:.17g}" if isinstance(v, float) else v for v in row])
    return path
