"""Electromotive force from a magnetic field and from the vortex Berry connection.

Classical side: for a prescribed B_z(r, t) and a rigidly drifting loop the
flux-rule EMF ``-dPhi/dt`` is compared with its split into an induction
term ``-int dB/dt dS`` and a motional term ``oint (v0 x B) . dr``.

Berry side: the curl of the vortex connection is a set of point fluxes,
``-pi * w_j`` at each core, so every flux through a surface is an exact
census sum. The flux-rule engine differences two census fluxes (and checks
them against loop quadrature); the line-form engine adds the time
derivative of the connection to the flux swept across each moving edge.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import InvalidConfig, QuadratureMismatch
from .field_core import VectorField2D, VortexConfig, berry_connection_field
from .topology import DEFAULT_TOL, PolyLoop, area_integral, line_integral, winding_number
from .units import NATURAL, UnitSystem


@dataclass(frozen=True)
class MovingLoop:
    """A loop translated rigidly with constant velocity ``drift``."""

    base: PolyLoop
    drift: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        d = tuple(float(v) for v in np.asarray(self.drift, float).reshape(2))
        object.__setattr__(self, "drift", d)

    def at(self, t: float) -> PolyLoop:
        return self.base.translated((self.drift[0] * t, self.drift[1] * t))


class TimeDependentB:
    """Out-of-plane field ``B_z(r, t)`` with its analytic time derivative.

    Both callables take ``(M, 2)`` points and a scalar time and return
    ``(M,)`` values.
    """

    def __init__(self, value: Callable, dt_value: Callable, family: str = "custom",
                 params: dict | None = None):
        self._value = value
        self._dt_value = dt_value
        self.family = family
        self.params = dict(params or {})

    def __call__(self, points, t: float) -> np.ndarray:
        pts = np.asarray(points, float).reshape(-1, 2)
        return np.broadcast_to(np.asarray(self._value(pts, t), float), pts.shape[:1]).copy()

    def dt(self, points, t: float) -> np.ndarray:
        pts = np.asarray(points, float).reshape(-1, 2)
        return np.broadcast_to(np.asarray(self._dt_value(pts, t), float), pts.shape[:1]).copy()

    def __repr__(self):
        return f"TimeDependentB({self.family}, {self.params})"

    @classmethod
    def uniform(cls, b0: float) -> "TimeDependentB":
        return cls(lambda p, t: b0, lambda p, t: 0.0, "uniform", {"b0": b0})

    @classmethod
    def linear_x(cls, gamma: float, b0: float = 0.0) -> "TimeDependentB":
        return cls(lambda p, t: b0 + gamma * p[:, 0], lambda p, t: 0.0,
                   "linear_x", {"gamma": gamma, "b0": b0})

    @classmethod
    def linear_t(cls, beta: float, b0: float = 0.0) -> "TimeDependentB":
        return cls(lambda p, t: b0 + beta * t, lambda p, t: beta,
                   "linear_t", {"beta": beta, "b0": b0})

    @classmethod
    def sinusoidal(cls, amplitude: float, kx: float = 1.0, ky: float = 0.0,
                   omega: float = 1.0, b0: float = 0.0) -> "TimeDependentB":
        phase = lambda p, t: kx * p[:, 0] + ky * p[:, 1] - omega * t  # noqa: E731
        return cls(lambda p, t: b0 + amplitude * np.sin(phase(p, t)),
                   lambda p, t: -omega * amplitude * np.cos(phase(p, t)),
                   "sinusoidal", {"amplitude": amplitude, "kx": kx, "ky": ky,
                                  "omega": omega, "b0": b0})

    @classmethod
    def from_family(cls, family: str, **params) -> "TimeDependentB":
        factories = {"uniform": cls.uniform, "linear_x": cls.linear_x,
                     "linear_t": cls.linear_t, "sinusoidal": cls.sinusoidal}
        if family not in factories:
            raise InvalidConfig(f"unknown B family {family!r}; choose from {sorted(factories)}")
        try:
            return factories[family](**params)
        except TypeError as exc:
            raise InvalidConfig(f"bad parameters for B family {family!r}: {exc}") from None


def magnetic_flux(b: TimeDependentB, loop: PolyLoop, t: float, tol: float = DEFAULT_TOL) -> float:
    """Flux of ``B_z`` through the loop, signed by the loop orientation."""
    return loop.orientation * area_integral(lambda p: b(p, t), loop, tol)


def faraday_emf_total(b: TimeDependentB, loop: MovingLoop, t: float, dt: float,
                      tol: float = 1e-13) -> float:
    """Forward-difference flux rule ``-[Phi(t + dt) - Phi(t)] / dt``."""
    if not dt > 0:
        raise InvalidConfig("dt must be positive")
    phi1 = magnetic_flux(b, loop.at(t + dt), t + dt, tol)
    phi0 = magnetic_flux(b, loop.at(t), t, tol)
    return -(phi1 - phi0) / dt


def faraday_emf_extrapolated(b: TimeDependentB, loop: MovingLoop, t: float, dt: float,
                             tol: float = 1e-13) -> tuple[float, float]:
    """Richardson-extrapolated ``dt -> 0`` flux rule and an error estimate.

    Two extrapolations, from (dt, dt/2) and from (dt/2, dt/4), are formed;
    the second is returned and their difference is the error estimate.
    """
    e1, e2, e4 = (faraday_emf_total(b, loop, t, dt / k, tol) for k in (1, 2, 4))
    r1, r2 = 2 * e2 - e1, 2 * e4 - e2
    return r2, abs(r2 - r1)


@dataclass(frozen=True)
class FaradayTerms:
    induction: float
    lorentz: float

    @property
    def total(self) -> float:
        return self.induction + self.lorentz


def faraday_emf_decomposed(b: TimeDependentB, loop: MovingLoop, t: float,
                           tol: float = 1e-13) -> FaradayTerms:
    """Induction term ``-int dB/dt dS`` and motional term ``oint (v0 x B) . dr`` at ``t``."""
    c = loop.at(t)
    induction = -c.orientation * area_integral(lambda p: b.dt(p, t), c, tol)
    vx, vy = loop.drift
    if vx == 0.0 and vy == 0.0:
        return FaradayTerms(induction, 0.0)
    # v0 x (B z) = (vy B, -vx B)
    motional = VectorField2D(lambda p: np.stack([vy * b(p, t), -vx * b(p, t)], axis=-1))
    return FaradayTerms(induction, line_integral(motional, c, tol))


def berry_flux(config: VortexConfig, loop: PolyLoop) -> float:
    """Flux of the Berry curvature through ``loop``: ``-pi`` per enclosed unit winding."""
    return -math.pi * winding_number(config, loop)


@dataclass(frozen=True)
class BerryEmfStep:
    emf: float
    winding_before: int
    winding_after: int
    meron_crossings: int
    antimeron_crossings: int
    quadrature: tuple[float, float] | None = None
    inside_after: np.ndarray | None = field(default=None, repr=False, compare=False)

    @property
    def winding_change(self) -> int:
        return self.winding_after - self.winding_before


def berry_emf_step(config: VortexConfig, loop: MovingLoop, t: float, dt: float,
                   units: UnitSystem = NATURAL, tol: float = 1e-8,
                   verify: bool = True, previous: BerryEmfStep | None = None) -> BerryEmfStep:
    """Berry EMF over ``[t, t + dt]`` by flux differencing, with census detail.

    The census value is authoritative. With ``verify`` both loop integrals of
    the connection are also computed by quadrature and must match
    ``-pi * winding`` within ``tol``, else ``QuadratureMismatch``. Passing the
    step that ended at ``t`` as ``previous`` reuses its end-of-step census.
    """
    if not dt > 0:
        raise InvalidConfig("dt must be positive")
    c0, c1 = loop.at(t), loop.at(t + dt)
    pos, w = config.positions, config.windings
    if pos.shape[0]:
        if previous is not None and previous.inside_after is not None:
            in0 = previous.inside_after
        else:
            in0 = c0.contains(pos, config.eps_core)
        in1 = c1.contains(pos, config.eps_core)
    else:
        in0 = in1 = np.zeros(0, bool)
    w0 = c0.orientation * int(w[in0].sum())
    w1 = c1.orientation * int(w[in1].sum())
    changed = in0 != in1
    emf = (units.hbar / units.e) * math.pi * (w1 - w0) / dt
    quad = None
    if verify:
        a = berry_connection_field(config)
        quad = (line_integral(a, c0, tol), line_integral(a, c1, tol))
        for q, wc in zip(quad, (w0, w1)):
            if abs(q + math.pi * wc) > tol:
                raise QuadratureMismatch(
                    f"loop integral {q!r} disagrees with census {-math.pi * wc!r} beyond tol={tol:g}")
    return BerryEmfStep(emf, w0, w1, int(np.count_nonzero(changed & (w == 1))),
                        int(np.count_nonzero(changed & (w == -1))), quad, in1)


def berry_emf_flux_rule(config: VortexConfig, loop: MovingLoop, t: float, dt: float,
                        units: UnitSystem = NATURAL, tol: float = 1e-8,
                        verify: bool = True) -> float:
    """``-(hbar/e) [oint_{C(t+dt)} A . dr - oint_{C(t)} A . dr] / dt``."""
    return berry_emf_step(config, loop, t, dt, units, tol, verify).emf


def _swept_parallelograms(c: PolyLoop, shift: np.ndarray):
    a, b = c.edges
    e = b - a
    side = e[:, 0] * shift[1] - e[:, 1] * shift[0]   # z-component of edge x shift
    for k in range(a.shape[0]):
        if side[k] == 0.0:
            continue
        quad = PolyLoop([a[k], b[k], b[k] + shift, a[k] + shift], validate=False)
        yield np.sign(side[k]), quad


def berry_emf_line_form(config: VortexConfig, loop: MovingLoop, t: float, dt: float,
                        units: UnitSystem = NATURAL, tol: float = 1e-8) -> float:
    """``-(hbar/e) oint [dA/dt - v0 x (curl A)] . dr`` averaged over ``[t, t + dt]``.

    The time derivative is a centred difference of the connection across the
    step (zero for a static vortex set). The motional term integrates the
    point fluxes swept by each edge during the step: an edge ``dl`` moving by
    ``v0 dt`` sweeps a parallelogram whose census flux enters with the sign
    of ``z . (dl x v0)``.
    """
    if not dt > 0:
        raise InvalidConfig("dt must be positive")
    c = loop.at(t)
    # static vortex set: the connection at t and t + dt is the same field
    a_late, a_early = berry_connection_field(config), berry_connection_field(config)
    ddt = VectorField2D(lambda p: (a_late.evaluate(p) - a_early.evaluate(p)) / dt,
                        config.positions, config.eps_core)
    dadt_term = line_integral(ddt, c, tol)

    shift = np.asarray(loop.drift, float) * dt
    swept = 0.0
    pos, w = config.positions, config.windings
    if pos.shape[0]:
        for sign, quad in _swept_parallelograms(c, shift):
            inside = quad.contains(pos, config.eps_core)
            swept += sign * (-math.pi) * int(w[inside].sum())
    return -(units.hbar / units.e) * (dadt_term - swept / dt)


@dataclass
class FaradaySweep:
    """Flux-rule and decomposed EMF at a series of times."""

    times: np.ndarray
    total: np.ndarray
    induction: np.ndarray
    lorentz: np.ndarray

    @property
    def decomposed(self) -> np.ndarray:
        return self.induction + self.lorentz


def faraday_sweep(b: TimeDependentB, loop: MovingLoop, times, dt: float,
                  tol: float = 1e-13) -> FaradaySweep:
    """Evaluate both Faraday forms at each of ``times`` (flux rule extrapolated)."""
    times = np.asarray(times, float).reshape(-1)
    total, ind, lor = (np.empty(times.size) for _ in range(3))
    for i, t in enumerate(times):
        total[i] = faraday_emf_extrapolated(b, loop, float(t), dt, tol)[0]
        terms = faraday_emf_decomposed(b, loop, float(t), tol)
        ind[i], lor[i] = terms.induction, terms.lorentz
    return FaradaySweep(times, total, ind, lor)
