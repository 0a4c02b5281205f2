"""Spin-vortex angle field, its gradient and the vortex Berry connection.

The angle field chi is multivalued, so it is never stored pointwise. Only
its gradient

    grad chi(r) = sum_j w_j * (-(y - y_j), x - x_j) / |r - r_j|^2

and loop integrals of it are computed. The Berry connection generated by
the vortices is ``A = -grad(chi) / 2``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.interpolate import RegularGridInterpolator

from .errors import InvalidConfig, InvalidDensity, SingularEvaluation
from .units import NATURAL, UnitSystem

DEFAULT_EPS_FRACTION = 1e-6


def _as_points(points) -> tuple[np.ndarray, tuple]:
    pts = np.asarray(points, dtype=float)
    if pts.shape[-1] != 2:
        raise ValueError(f"points must have a trailing dimension of 2, got shape {pts.shape}")
    return pts.reshape(-1, 2), pts.shape[:-1]


@dataclass(frozen=True)
class VortexConfig:
    """Point vortex cores with odd winding numbers in ``[0, Lx] x [0, Ly]``.

    ``positions`` is ``(K, 2)``, ``windings`` is ``(K,)`` of odd integers.
    ``eps_core`` is the exclusion radius around each core; ``None`` picks
    ``1e-6 * min(Lx, Ly)``.
    """

    positions: np.ndarray
    windings: np.ndarray
    lx: float
    ly: float
    eps_core: float | None = None

    def __post_init__(self):
        pos = np.asarray(self.positions, dtype=float).reshape(-1, 2)
        w = np.asarray(self.windings).reshape(-1)
        if pos.shape[0] != w.shape[0]:
            raise InvalidConfig("positions and windings differ in length")
        if not (self.lx > 0 and self.ly > 0):
            raise InvalidConfig("domain sides must be positive")
        if w.size and not np.all(np.equal(np.mod(w, 1), 0)):
            raise InvalidConfig("winding numbers must be integers")
        w = w.astype(np.int64)
        if np.any(w % 2 == 0):
            raise InvalidConfig("winding numbers must be odd integers")
        if pos.size:
            if not np.all(np.isfinite(pos)):
                raise InvalidConfig("core positions must be finite")
            inside = ((pos[:, 0] > 0) & (pos[:, 0] < self.lx)
                      & (pos[:, 1] > 0) & (pos[:, 1] < self.ly))
            if not np.all(inside):
                raise InvalidConfig("all cores must lie strictly inside the domain")
            if np.unique(pos, axis=0).shape[0] != pos.shape[0]:
                raise InvalidConfig("two cores coincide")
        eps = self.eps_core
        if eps is None:
            eps = DEFAULT_EPS_FRACTION * min(self.lx, self.ly)
        if not eps > 0:
            raise InvalidConfig("eps_core must be positive")
        pos.setflags(write=False)
        w.setflags(write=False)
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "windings", w)
        object.__setattr__(self, "eps_core", float(eps))

    @classmethod
    def from_cores(cls, cores: Sequence[tuple[float, float, int]], lx: float, ly: float,
                   eps_core: float | None = None) -> "VortexConfig":
        cores = list(cores)
        pos = np.array([(c[0], c[1]) for c in cores], dtype=float).reshape(-1, 2)
        w = np.array([c[2] for c in cores], dtype=np.int64)
        return cls(pos, w, lx, ly, eps_core)

    @classmethod
    def empty(cls, lx: float = 1.0, ly: float = 1.0, eps_core: float | None = None):
        return cls(np.empty((0, 2)), np.empty(0, dtype=np.int64), lx, ly, eps_core)

    def __len__(self) -> int:
        return self.windings.shape[0]

    @property
    def cores(self) -> list[tuple[float, float, int]]:
        return [(float(x), float(y), int(w)) for (x, y), w in zip(self.positions, self.windings)]

    @property
    def n_merons(self) -> int:
        return int(np.count_nonzero(self.windings == 1))

    @property
    def n_antimerons(self) -> int:
        return int(np.count_nonzero(self.windings == -1))

    def mirrored(self) -> "VortexConfig":
        """Same cores with every winding sign flipped."""
        return VortexConfig(self.positions, -self.windings, self.lx, self.ly, self.eps_core)

    def union(self, other: "VortexConfig") -> "VortexConfig":
        return VortexConfig(np.vstack([self.positions, other.positions]),
                            np.concatenate([self.windings, other.windings]),
                            max(self.lx, other.lx), max(self.ly, other.ly),
                            min(self.eps_core, other.eps_core))


class VectorField2D:
    """A planar vector field with optional point singularities.

    ``evaluator`` maps an ``(M, 2)`` array of points to an ``(M, 2)`` array
    of vectors. Calling the field accepts any ``(..., 2)`` shape. Points
    closer than ``eps_core`` to a singular point raise ``SingularEvaluation``.
    """

    def __init__(self, evaluator: Callable[[np.ndarray], np.ndarray],
                 singular_points=None, eps_core: float = 0.0):
        self._evaluator = evaluator
        sp = np.empty((0, 2)) if singular_points is None else np.asarray(singular_points, float)
        sp = sp.reshape(-1, 2).copy()
        sp.setflags(write=False)
        self.singular_points = sp
        self.eps_core = float(eps_core)

    def check_regular(self, pts: np.ndarray) -> None:
        if self.singular_points.shape[0] == 0 or pts.shape[0] == 0:
            return
        d2 = ((pts[:, None, :] - self.singular_points[None, :, :]) ** 2).sum(-1)
        if np.min(d2) <= self.eps_core ** 2:
            i, j = np.unravel_index(np.argmin(d2), d2.shape)
            raise SingularEvaluation(
                f"point {tuple(pts[i].tolist())} lies within eps_core={self.eps_core:g} "
                f"of singular point {tuple(self.singular_points[j].tolist())}")

    def evaluate(self, pts: np.ndarray) -> np.ndarray:
        """Evaluate on a flat ``(M, 2)`` array (no reshaping)."""
        self.check_regular(pts)
        return self.evaluate_unchecked(pts)

    def evaluate_unchecked(self, pts: np.ndarray) -> np.ndarray:
        """Evaluate without the singular-point guard; callers must have checked."""
        return np.asarray(self._evaluator(pts), dtype=float).reshape(pts.shape[0], 2)

    def __call__(self, points) -> np.ndarray:
        pts, lead = _as_points(points)
        return self.evaluate(pts).reshape(lead + (2,))

    def _combine(self, other: "VectorField2D", op) -> "VectorField2D":
        a, b = self, other
        sp = np.vstack([a.singular_points, b.singular_points])
        eps = max(a.eps_core, b.eps_core)
        return VectorField2D(lambda p: op(a.evaluate_unchecked(p), b.evaluate_unchecked(p)),
                             sp, eps)

    def __add__(self, other):
        return self._combine(other, np.add)

    def __sub__(self, other):
        return self._combine(other, np.subtract)

    def scaled(self, factor: float) -> "VectorField2D":
        src = self
        return VectorField2D(lambda p: factor * src.evaluate_unchecked(p),
                             self.singular_points, self.eps_core)

    def __mul__(self, factor: float):
        return self.scaled(float(factor))

    __rmul__ = __mul__

    def __neg__(self):
        return self.scaled(-1.0)


def constant_field(vector) -> VectorField2D:
    vec = np.asarray(vector, dtype=float).reshape(2)
    return VectorField2D(lambda p: np.broadcast_to(vec, p.shape).copy())


ZERO_FIELD = constant_field((0.0, 0.0))


class GridVectorField(VectorField2D):
    """Vector field sampled on a rectangular mesh, bilinear in between.

    ``values`` has shape ``(nx, ny, 2)``; entries where ``mask`` is True are
    treated as undefined and come back as NaN.
    """

    def __init__(self, x, y, values, mask=None):
        self.x = np.asarray(x, dtype=float)
        self.y = np.asarray(y, dtype=float)
        vals = np.array(values, dtype=float)
        if vals.shape != (self.x.size, self.y.size, 2):
            raise ValueError("values must have shape (nx, ny, 2)")
        self.mask = np.zeros(vals.shape[:2], bool) if mask is None else np.asarray(mask, bool)
        vals[self.mask] = np.nan
        self.values = vals
        self._interp = RegularGridInterpolator((self.x, self.y), vals, method="linear",
                                               bounds_error=True)
        super().__init__(self._interp)

    @property
    def points(self) -> np.ndarray:
        xx, yy = np.meshgrid(self.x, self.y, indexing="ij")
        return np.stack([xx, yy], axis=-1)


def chi_gradient(config: VortexConfig) -> VectorField2D:
    """Closed-form gradient of the vortex angle field."""
    cores = config.positions
    w = config.windings.astype(float)

    def grad(p: np.ndarray) -> np.ndarray:
        if cores.shape[0] == 0:
            return np.zeros_like(p)
        dx = p[:, None, 0] - cores[None, :, 0]
        dy = p[:, None, 1] - cores[None, :, 1]
        inv = w[None, :] / (dx * dx + dy * dy)
        return np.stack([-(dy * inv).sum(1), (dx * inv).sum(1)], axis=-1)

    return VectorField2D(grad, cores, config.eps_core)


def berry_connection_field(config: VortexConfig) -> VectorField2D:
    """Vortex Berry connection ``-grad(chi) / 2``."""
    return chi_gradient(config).scaled(-0.5)


def velocity_field(a_em: VectorField2D, a_mb: VectorField2D,
                   units: UnitSystem = NATURAL) -> VectorField2D:
    """``v = (e/m_e) A_em + (hbar/m_e) A_mb``."""
    return a_em.scaled(units.e / units.m_e) + a_mb.scaled(units.hbar / units.m_e)


def current_density(rho, v: VectorField2D, units: UnitSystem = NATURAL) -> VectorField2D:
    """``j = -e rho v``. ``rho`` is a constant or a callable on ``(M, 2)`` points."""
    if callable(rho):
        density = rho
    else:
        value = float(rho)
        if value < 0:
            raise InvalidDensity(f"density must be non-negative, got {value}")
        density = lambda p: np.full(p.shape[0], value)  # noqa: E731

    def j(p):
        r = np.asarray(density(p), dtype=float).reshape(-1)
        if np.any(r < 0):
            raise InvalidDensity("negative density encountered")
        return -units.e * r[:, None] * v.evaluate_unchecked(p)

    return VectorField2D(j, v.singular_points, v.eps_core)


def curl_z(field: VectorField2D, points, step: float) -> np.ndarray:
    """Centered finite-difference z-curl ``dFy/dx - dFx/dy`` at ``points``."""
    pts, lead = _as_points(points)
    ex = np.array([step, 0.0])
    ey = np.array([0.0, step])
    dfy_dx = (field.evaluate(pts + ex)[:, 1] - field.evaluate(pts - ex)[:, 1]) / (2 * step)
    dfx_dy = (field.evaluate(pts + ey)[:, 0] - field.evaluate(pts - ey)[:, 0]) / (2 * step)
    return (dfy_dx - dfx_dy).reshape(lead)
