"""Monte Carlo Nernst signal from a static meron/antimeron gas.

Geometry: the sample ``[0, Lx] x [0, Ly]`` holds a frozen Poisson gas of
w = +1 (meron) and w = -1 (antimeron) cores. The measurement circuit is a
rectangle spanning the full sample height whose trailing edge starts at
``edge_start`` inside the sample and whose leading edge sits ``overhang``
beyond ``x = Lx``, outside the gas, where the circuit closes. The circuit
drifts along +x with speed ``v0``; each time step the trailing edge
releases the cores it sweeps past, and every release is one quantized
EMF event. The expected field is ``E_y = h v0 (n_a - n_m) / (2 e)``.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .emf import MovingLoop, berry_emf_step
from .errors import (AmbiguousEnclosure, InvalidConfig, InvalidGradient, ScenarioTooLarge)
from .field_core import VortexConfig
from .topology import PolyLoop
from .units import UnitSystem, get_units

MAX_EXPECTED_CORES = 1e7
RETRY_DT_FACTOR = 1.0 + 1e-3
SCHEMA_VERSION = "1.0"


@dataclass(frozen=True)
class NernstScenario:
    """Parameters of one Nernst run (all validated on construction).

    ``dt`` defaults to ``1 / (4 max(n_m, n_a) Ly v0)`` so a step sweeps a
    quarter core on average; ``n_steps`` defaults to 99% of the steps that
    fit before the trailing edge reaches ``Lx``; ``edge_start`` and
    ``overhang`` default to ``Lx / 10``; ``eps_core`` defaults to
    ``1e-9 * min(Lx, Ly)``.
    """

    lx: float = 10.0
    ly: float = 10.0
    n_m: float = 1.0
    n_a: float = 2.0
    v0: float = 1.0
    dt: float | None = None
    n_steps: int | None = None
    grad_t: float = 1.0
    seed: int = 0
    units: str = "natural"
    edge_start: float | None = None
    overhang: float | None = None
    eps_core: float | None = None
    quadrature_checks: int = 2
    tol: float = 1e-8

    def __post_init__(self):
        set_ = lambda k, v: object.__setattr__(self, k, v)  # noqa: E731
        if not (self.lx > 0 and self.ly > 0):
            raise InvalidConfig("lx and ly must be positive")
        if not (self.n_m >= 0 and self.n_a >= 0) or not np.isfinite(self.n_m + self.n_a):
            raise InvalidConfig("densities n_m and n_a must be finite and non-negative")
        if not self.v0 > 0:
            raise InvalidConfig("drift speed v0 must be positive")
        if not self.grad_t > 0:
            raise InvalidGradient("|dT/dx| must be positive")
        get_units(self.units)
        if (self.n_m + self.n_a) * self.lx * self.ly > MAX_EXPECTED_CORES:
            raise ScenarioTooLarge("expected core count exceeds 1e7")
        set_("edge_start", self.lx / 10 if self.edge_start is None else float(self.edge_start))
        set_("overhang", self.lx / 10 if self.overhang is None else float(self.overhang))
        if not 0 < self.edge_start < self.lx:
            raise InvalidConfig("edge_start must lie inside (0, lx)")
        if not self.overhang > 0:
            raise InvalidConfig("overhang must be positive")
        if self.dt is None:
            rate = max(self.n_m, self.n_a, 1e-300) * self.ly * self.v0
            set_("dt", min(1.0 / (4.0 * rate), (self.lx - self.edge_start) / self.v0 / 4))
        if not self.dt > 0:
            raise InvalidConfig("dt must be positive")
        if self.n_steps is None:
            set_("n_steps", max(1, int(0.99 * (self.lx - self.edge_start) / (self.v0 * self.dt))))
        if int(self.n_steps) != self.n_steps or self.n_steps < 1:
            raise InvalidConfig("n_steps must be a positive integer")
        set_("n_steps", int(self.n_steps))
        if self.edge_start + self.v0 * self.dt * self.n_steps > self.lx:
            raise InvalidConfig("the trailing edge would leave the sample: "
                                "edge_start + v0*dt*n_steps must not exceed lx")
        if self.eps_core is None:
            set_("eps_core", 1e-9 * min(self.lx, self.ly))
        if not self.eps_core > 0:
            raise InvalidConfig("eps_core must be positive")
        if self.quadrature_checks < 0:
            raise InvalidConfig("quadrature_checks must be non-negative")

    @property
    def unit_system(self) -> UnitSystem:
        return get_units(self.units)

    @property
    def predicted_e_y(self) -> float:
        u = self.unit_system
        return u.h * self.v0 * (self.n_a - self.n_m) / (2.0 * u.e)

    def loop(self) -> MovingLoop:
        rect = PolyLoop.rectangle(self.edge_start, 0.0, self.lx + self.overhang, self.ly)
        return MovingLoop(rect, (self.v0, 0.0))

    def as_dict(self) -> dict:
        return asdict(self)


def sample_vortex_gas(scenario: NernstScenario, rng: np.random.Generator) -> VortexConfig:
    """Independent homogeneous Poisson processes of merons and antimerons.

    Cores within ``eps_core`` of the domain boundary are redrawn, which keeps
    the full-height loop census well defined.
    """
    lx, ly, eps = scenario.lx, scenario.ly, scenario.eps_core
    area = lx * ly
    if (scenario.n_m + scenario.n_a) * area > MAX_EXPECTED_CORES:
        raise ScenarioTooLarge("expected core count exceeds 1e7")
    counts = rng.poisson(scenario.n_m * area), rng.poisson(scenario.n_a * area)
    blocks = []
    for count in counts:
        pos = rng.uniform((0.0, 0.0), (lx, ly), size=(count, 2))
        while True:
            bad = ((pos[:, 0] <= eps) | (pos[:, 0] >= lx - eps)
                   | (pos[:, 1] <= eps) | (pos[:, 1] >= ly - eps))
            if not bad.any():
                break
            pos[bad] = rng.uniform((0.0, 0.0), (lx, ly), size=(int(bad.sum()), 2))
        blocks.append(pos)
    windings = np.concatenate([np.ones(counts[0], np.int64), -np.ones(counts[1], np.int64)])
    return VortexConfig(np.vstack(blocks), windings, lx, ly, eps)


@dataclass
class NernstResult:
    """One gas realization swept by the drifting circuit."""

    emf_samples: np.ndarray
    winding_changes: np.ndarray
    dt: float
    ly: float
    crossing_counts: tuple[int, int]
    e_y_mean: float
    e_y_stderr: float
    e_n: float
    realization: int = 0
    n_cores: tuple[int, int] = (0, 0)
    quadrature_checks: list = field(default_factory=list)

    @property
    def times(self) -> np.ndarray:
        return self.dt * np.arange(self.emf_samples.size)


def _rng_for(seed: int, realization: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(realization,)))


def _sweep(scenario: NernstScenario, config: VortexConfig, dt: float, realization: int):
    units = scenario.unit_system
    loop = scenario.loop()
    n = scenario.n_steps
    checks = set()
    if scenario.quadrature_checks:
        checks = set(np.linspace(0, n - 1, scenario.quadrature_checks).round().astype(int).tolist())
    emf = np.empty(n)
    dw = np.empty(n, np.int64)
    merons = antimerons = 0
    quad = []
    step = None
    for k in range(n):
        step = berry_emf_step(config, loop, k * dt, dt, units, scenario.tol,
                              verify=k in checks, previous=step)
        emf[k] = step.emf
        dw[k] = step.winding_change
        merons += step.meron_crossings
        antimerons += step.antimeron_crossings
        if step.quadrature is not None:
            quad.append((k, step.winding_before, step.winding_after) + step.quadrature)
    e_y = emf / scenario.ly
    mean = float(e_y.mean())
    stderr = float(e_y.std(ddof=1) / math.sqrt(n)) if n > 1 else float("nan")
    return NernstResult(emf, dw, dt, scenario.ly, (merons, antimerons), mean, stderr,
                        mean / scenario.grad_t, realization,
                        (config.n_merons, config.n_antimerons), quad)


def run_nernst(scenario: NernstScenario, realization: int = 0,
               config: VortexConfig | None = None) -> NernstResult:
    """Sweep one gas realization (drawn from ``seed`` and ``realization``).

    A core landing on the circuit boundary at some step triggers one rerun
    with ``dt`` scaled by ``1 + 1e-3``; a second hit raises.
    """
    if config is None:
        config = sample_vortex_gas(scenario, _rng_for(scenario.seed, realization))
    try:
        return _sweep(scenario, config, scenario.dt, realization)
    except AmbiguousEnclosure:
        dt = scenario.dt * RETRY_DT_FACTOR
        if scenario.edge_start + scenario.v0 * dt * scenario.n_steps > scenario.lx:
            raise
        return _sweep(scenario, config, dt, realization)


@dataclass
class EnsembleResult:
    scenario: NernstScenario
    realizations: list
    e_y: np.ndarray
    e_y_mean: float
    e_y_stderr: float
    e_y_predicted: float
    e_n: float
    e_n_predicted: float
    crossing_counts: tuple[int, int]

    def summary(self) -> dict:
        return nernst_summary(self)


def _run_one(args):
    scenario, i = args
    return run_nernst(scenario, i)


def run_ensemble(scenario: NernstScenario, n_realizations: int = 200,
                 workers: int = 1) -> EnsembleResult:
    """Independent realizations, each with its own seed-derived stream.

    Results are aggregated in realization order, so the outcome does not
    depend on ``workers``.
    """
    if n_realizations < 2:
        raise InvalidConfig("an ensemble needs at least 2 realizations")
    jobs = [(scenario, i) for i in range(n_realizations)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_one, jobs, chunksize=max(1, n_realizations // (4 * workers))))
    else:
        results = [_run_one(j) for j in jobs]
    e_y = np.array([r.e_y_mean for r in results])
    mean = float(e_y.mean())
    stderr = float(e_y.std(ddof=1) / math.sqrt(e_y.size))
    signal = nernst_signal(mean, scenario)
    crossings = (sum(r.crossing_counts[0] for r in results),
                 sum(r.crossing_counts[1] for r in results))
    return EnsembleResult(scenario, results, e_y, mean, stderr, scenario.predicted_e_y,
                          signal.measured, signal.predicted, crossings)


@dataclass(frozen=True)
class NernstSignal:
    measured: float
    predicted: float


def nernst_signal(result, scenario: NernstScenario, grad_t: float | None = None) -> NernstSignal:
    """``e_N = E_y / |dT/dx|``, measured and from ``h v0 (n_d - n_p) / (2 e |dT/dx|)``.

    ``result`` is a ``NernstResult``, an ``EnsembleResult`` or a bare ``E_y``.
    The diamagnetic density ``n_d`` is the antimeron density and ``n_p`` the
    meron density.
    """
    g = scenario.grad_t if grad_t is None else grad_t
    if not g > 0:
        raise InvalidGradient("|dT/dx| must be positive")
    e_y = result if isinstance(result, (int, float, np.floating)) else result.e_y_mean
    return NernstSignal(float(e_y) / g, scenario.predicted_e_y / g)


def nernst_summary(ens: EnsembleResult) -> dict:
    """JSON-ready summary; floats are plain Python floats for stable output."""
    sc = ens.scenario
    return {
        "schema_version": SCHEMA_VERSION,
        "command": "nernst",
        "scenario": sc.as_dict(),
        "units": sc.unit_system.as_dict(),
        "n_realizations": len(ens.realizations),
        "E_y_mean": ens.e_y_mean,
        "E_y_stderr": ens.e_y_stderr,
        "E_y_predicted": ens.e_y_predicted,
        "E_y_deviation_in_stderr": (ens.e_y_mean - ens.e_y_predicted) / ens.e_y_stderr
        if ens.e_y_stderr > 0 else None,
        "e_N": ens.e_n,
        "e_N_predicted": ens.e_n_predicted,
        "crossing_counts": {"merons": ens.crossing_counts[0],
                            "antimerons": ens.crossing_counts[1]},
        "quadrature_checks": sum(len(r.quadrature_checks) for r in ens.realizations),
    }


@dataclass
class DensitySweep:
    """Mean ``E_y`` against the density difference ``n_a - n_m``."""

    differences: np.ndarray
    e_y: np.ndarray
    predicted: np.ndarray
    n_realizations: int


def _marked_gas(scenario: NernstScenario, total: float, rng: np.random.Generator):
    """One Poisson gas of intensity ``total`` plus a uniform mark per core."""
    probe = NernstScenario(**{**scenario.as_dict(), "n_m": total, "n_a": 0.0})
    gas = sample_vortex_gas(probe, rng)
    return gas.positions, rng.uniform(size=len(gas))


def density_sweep(scenario: NernstScenario, differences=(-2, -1, 0, 1, 2),
                  n_realizations: int = 4, total: float | None = None) -> DensitySweep:
    """Mean ``E_y`` for ``n_a - n_m`` in ``differences`` at fixed ``n_a + n_m``.

    Each realization draws one gas of intensity ``total`` and labels a core
    an antimeron when its uniform mark falls below ``n_a / total``. Marking a
    Poisson process independently splits it into two independent Poisson
    processes, so every point of the sweep has the right statistics; sharing
    the gas across points makes the curve monotone in the difference.
    """
    diffs = np.asarray(differences, float).reshape(-1)
    if total is None:
        total = float(np.max(np.abs(diffs))) + 1.0 if diffs.size else 1.0
    if diffs.size and np.max(np.abs(diffs)) > total:
        raise InvalidConfig("total density must be at least |n_a - n_m| for every sweep point")
    if n_realizations < 1:
        raise InvalidConfig("n_realizations must be positive")
    scens = [NernstScenario(**{**scenario.as_dict(), "n_m": (total - d) / 2, "n_a": (total + d) / 2,
                               "dt": None, "n_steps": None})
             for d in diffs]
    # a common time grid keeps the per-point estimates comparable
    dt = min(s.dt for s in scens) if scens else scenario.dt
    scens = [NernstScenario(**{**s.as_dict(), "dt": dt, "n_steps": None}) for s in scens]
    sums = np.zeros(diffs.size)
    for i in range(n_realizations):
        pos, marks = _marked_gas(scens[0] if scens else scenario, total, _rng_for(scenario.seed, i))
        for k, s in enumerate(scens):
            w = np.where(marks < s.n_a / total, -1, 1)
            cfg = VortexConfig(pos, w, s.lx, s.ly, s.eps_core)
            sums[k] += run_nernst(s, i, config=cfg).e_y_mean
    return DensitySweep(diffs, sums / n_realizations,
                        np.array([s.predicted_e_y for s in scens]), n_realizations)
