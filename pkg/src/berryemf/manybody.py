"""Berry connection of discretized one- and two-electron wave functions.

For a wave function Psi(r1, s1, ..., rN, sN) sampled on a uniform mesh the
connection at r is

    A(r) = Re sum_s1 int dx2.. Psi^* (-i hbar grad_r) Psi / (hbar rho(r))
         = Im sum_s1 int dx2.. Psi^* grad_r Psi / rho(r)

with rho(r) the reduced density built from the same sum. hbar cancels, so
the result carries units of inverse length in every unit system. Gradients
use second-order centred differences (one-sided second order at the mesh
edges).

Amplitude layout: ``(nx, ny, ns)`` for one electron and
``(nx, ny, ns, nx, ny, ns)`` for two, x index first, row-major.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import (DensityFloor, InvalidConfig, InvalidEnsemble, InvalidTemperature,
                     ValidationError)
from .field_core import GridVectorField, VectorField2D
from .units import NATURAL, UnitSystem

MAX_GRID = {1: 64, 2: 24}
NORM_TOL = 1e-10
RHO_FLOOR = 1e-12
PROB_TOL = 1e-12


class GridWaveFunction:
    """Normalized N = 1 or 2 electron amplitudes on a uniform square-cell mesh.

    Parameters
    ----------
    amplitudes : complex array
        ``(nx, ny)`` or ``(nx, ny, ns)`` for one electron,
        ``(nx, ny, ns, nx, ny, ns)`` for two.
    spacing : float
        Mesh spacing ``h`` (same along x and y).
    origin : (float, float)
        Coordinates of grid point ``[0, 0]``.
    normalize : bool
        Rescale so that ``sum |Psi|^2 h^(2N) = 1``. Otherwise the norm is
        checked against that condition.
    """

    def __init__(self, amplitudes, spacing: float, origin=(0.0, 0.0), normalize: bool = False):
        psi = np.array(amplitudes, dtype=complex)
        if psi.ndim == 2:
            psi = psi[..., None]
        if psi.ndim == 3:
            n = 1
        elif psi.ndim == 6:
            n = 2
            if psi.shape[3:] != psi.shape[:3]:
                raise InvalidConfig("both electrons must share the same mesh and spin dimension")
        else:
            raise InvalidConfig(f"cannot infer electron count from shape {psi.shape}")
        if not spacing > 0:
            raise InvalidConfig("mesh spacing must be positive")
        nx, ny, ns = psi.shape[:3]
        if max(nx, ny) > MAX_GRID[n]:
            raise InvalidConfig(f"N={n} grids are capped at {MAX_GRID[n]} points per side")
        if min(nx, ny) < 3:
            raise InvalidConfig("need at least 3 points per side for the derivative stencil")
        self.electron_count = n
        self.spacing = float(spacing)
        self.origin = (float(origin[0]), float(origin[1]))
        self.x = self.origin[0] + self.spacing * np.arange(nx)
        self.y = self.origin[1] + self.spacing * np.arange(ny)
        self.spin_dim = ns
        norm = float(np.sum(np.abs(psi) ** 2) * self.spacing ** (2 * n))
        if normalize:
            if norm == 0:
                raise InvalidConfig("cannot normalize a zero wave function")
            psi = psi / np.sqrt(norm)
        elif abs(norm - 1.0) > NORM_TOL:
            raise InvalidConfig(f"wave function norm {norm!r} differs from 1")
        if n == 2:
            swap = psi.transpose(3, 4, 5, 0, 1, 2)
            if np.max(np.abs(psi + swap)) > 1e-10 * max(np.max(np.abs(psi)), 1e-300):
                raise InvalidConfig("two-electron amplitudes are not antisymmetric")
        psi.setflags(write=False)
        self.amplitudes = psi

    @property
    def shape(self):
        return self.amplitudes.shape

    @property
    def norm(self) -> float:
        return float(np.sum(np.abs(self.amplitudes) ** 2) * self.spacing ** (2 * self.electron_count))

    def mesh(self) -> tuple[np.ndarray, np.ndarray]:
        return np.meshgrid(self.x, self.y, indexing="ij")

    @classmethod
    def from_orbital(cls, orbital, spacing, origin=(0.0, 0.0)) -> "GridWaveFunction":
        """One electron in ``orbital`` (``(nx, ny)`` or ``(nx, ny, ns)``), normalized."""
        return cls(orbital, spacing, origin, normalize=True)

    @classmethod
    def slater_pair(cls, phi_a, phi_b, spacing, origin=(0.0, 0.0)) -> "GridWaveFunction":
        """Normalized two-electron determinant of spin-orbitals ``phi_a``, ``phi_b``."""
        a = np.asarray(phi_a, complex)
        b = np.asarray(phi_b, complex)
        if a.ndim == 2:
            a, b = a[..., None], b[..., None]
        psi = np.multiply.outer(a, b) - np.multiply.outer(b, a)
        return cls(psi, spacing, origin, normalize=True)

    def with_phase(self, phase) -> "GridWaveFunction":
        """Multiply each electron coordinate by the one-body factor ``phase``."""
        ph = np.asarray(phase, complex)
        if ph.shape != self.amplitudes.shape[:2]:
            raise InvalidConfig("phase samples must match the (nx, ny) mesh")
        if self.electron_count == 1:
            psi = self.amplitudes * ph[:, :, None]
        else:
            psi = self.amplitudes * ph[:, :, None, None, None, None] * ph[None, None, None, :, :, None]
        return GridWaveFunction(psi, self.spacing, self.origin, normalize=True)


@dataclass
class ManyBodyConnection:
    connection: GridVectorField
    density: np.ndarray
    masked: np.ndarray

    @property
    def n_masked(self) -> int:
        return int(self.masked.sum())

    @property
    def values(self) -> np.ndarray:
        return self.connection.values


def berry_connection_mb(psi: GridWaveFunction, rho_floor: float = RHO_FLOOR,
                        strict: bool = False) -> ManyBodyConnection:
    """Berry connection and reduced density of ``psi`` on its own mesh.

    Points with ``rho <= rho_floor * max(rho)`` are masked (NaN in the
    returned field). With ``strict=True`` any masked point raises
    ``DensityFloor``; otherwise only a fully masked mesh does.
    """
    amp = psi.amplitudes
    h = psi.spacing
    gx = np.gradient(amp, h, axis=0, edge_order=2)
    gy = np.gradient(amp, h, axis=1, edge_order=2)
    conj = amp.conj()
    rest = tuple(range(2, amp.ndim))
    weight = h ** (2 * (psi.electron_count - 1))
    rho = np.sum(np.abs(amp) ** 2, axis=rest) * weight
    jx = np.sum((conj * gx).imag, axis=rest) * weight
    jy = np.sum((conj * gy).imag, axis=rest) * weight

    masked = rho <= rho_floor * rho.max()
    if masked.all() or (strict and masked.any()):
        raise DensityFloor(f"{int(masked.sum())} mesh points fall below the density floor")
    safe = np.where(masked, 1.0, rho)
    values = np.stack([jx / safe, jy / safe], axis=-1)
    return ManyBodyConnection(GridVectorField(psi.x, psi.y, values, masked), rho, masked)


@dataclass
class FactorizationReport:
    residual: float
    n_masked: int
    connection: ManyBodyConnection


def factorization_check(psi: GridWaveFunction, phase, rho_floor: float = RHO_FLOOR,
                        region=None) -> FactorizationReport:
    """Strip a supplied phase and measure what current is left.

    ``phase`` holds samples of ``exp(-i chi / 2)`` on the mesh. The
    currentless part ``Psi0 = Psi * prod_j exp(+i chi(r_j) / 2)`` is formed and
    the largest ``|A[Psi0]|`` over unmasked points (optionally restricted to
    the boolean ``region``) is returned as ``residual``.
    """
    ph = np.asarray(phase, complex)
    if ph.shape != psi.amplitudes.shape[:2]:
        raise InvalidConfig("phase samples must match the (nx, ny) mesh")
    if np.max(np.abs(np.abs(ph) - 1.0)) > 1e-12:
        raise ValidationError("phase samples must have unit modulus")
    psi0 = psi.with_phase(ph.conj())
    conn = berry_connection_mb(psi0, rho_floor)
    mag = np.hypot(conn.values[..., 0], conn.values[..., 1])
    keep = ~conn.masked
    if region is not None:
        keep &= np.asarray(region, bool)
    residual = float(np.max(mag[keep])) if keep.any() else 0.0
    return FactorizationReport(residual, conn.n_masked, conn)


def phase_from_chi(chi_values) -> np.ndarray:
    """``exp(-i chi / 2)`` from angle samples."""
    return np.exp(-0.5j * np.asarray(chi_values, float))


def boltzmann_weights(energies: Sequence[float], temperature, units: UnitSystem = NATURAL):
    """Normalized Boltzmann probabilities ``exp(-E_j / k_B T)``.

    ``temperature`` may be a positive scalar (returns ``(m,)``), an array of
    temperatures (returns ``(..., m)``) or a callable on ``(M, 2)`` points,
    in which case a callable ``points -> (M, m)`` is returned.
    """
    e = np.asarray(energies, float).reshape(-1)
    if e.size == 0:
        raise InvalidEnsemble("need at least one energy")
    if not np.isfinite(e.min()):
        raise InvalidEnsemble("the lowest energy must be finite")

    def weights(t):
        t = np.asarray(t, float)
        if np.any(~(t > 0)):
            raise InvalidTemperature("temperature must be strictly positive")
        logits = -e / (units.k_B * t[..., None])
        logits = logits - logits.max(axis=-1, keepdims=True)
        p = np.exp(logits)
        return p / p.sum(axis=-1, keepdims=True)

    if callable(temperature):
        return lambda pts: weights(np.asarray(temperature(pts), float).reshape(-1))
    return weights(temperature)


def _check_probs(p: np.ndarray) -> None:
    if np.any(p < 0) or np.any(~np.isfinite(p)):
        raise InvalidEnsemble("probabilities must be finite and non-negative")
    if np.any(np.abs(p.sum(axis=-1) - 1.0) > PROB_TOL):
        raise InvalidEnsemble("probabilities must sum to 1")


class MixtureEnsemble:
    """Members with probabilities ``p_j``, constant or position dependent.

    ``members`` are connection fields or ``GridWaveFunction`` instances (whose
    connection is computed on construction). ``probabilities`` is a sequence
    of numbers, or a callable ``(M, 2) -> (M, m)`` checked at evaluation.
    """

    def __init__(self, members: Sequence, probabilities, energies=None):
        self.members = [m if isinstance(m, VectorField2D) else berry_connection_mb(m).connection
                        for m in members]
        if not self.members:
            raise InvalidEnsemble("ensemble is empty")
        if callable(probabilities):
            self.probabilities = probabilities
        else:
            p = np.asarray(probabilities, float).reshape(-1)
            if p.size != len(self.members):
                raise InvalidEnsemble("one probability per member is required")
            _check_probs(p)
            self.probabilities = p
        self.energies = None if energies is None else np.asarray(energies, float)

    @classmethod
    def boltzmann(cls, members, energies, temperature, units: UnitSystem = NATURAL):
        return cls(members, boltzmann_weights(energies, temperature, units), energies)

    def weights_at(self, pts: np.ndarray) -> np.ndarray:
        if callable(self.probabilities):
            p = np.asarray(self.probabilities(pts), float).reshape(pts.shape[0], len(self.members))
            _check_probs(p)
            return p
        return np.broadcast_to(self.probabilities, (pts.shape[0], len(self.members)))


def mixture_connection(ensemble: MixtureEnsemble) -> VectorField2D:
    """Probability-weighted sum of the member connections."""
    members = ensemble.members
    sp = np.vstack([m.singular_points for m in members])
    eps = max(m.eps_core for m in members)

    def combined(pts):
        p = ensemble.weights_at(pts)
        out = np.zeros((pts.shape[0], 2))
        for j, m in enumerate(members):
            out += p[:, j, None] * m.evaluate_unchecked(pts)
        return out

    return VectorField2D(combined, sp, eps)
