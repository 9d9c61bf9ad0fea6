"""Scenario runs, derived metrics and parameter sweeps."""

from __future__ import annotations

import logging
import math
import os
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .dynamics import ChainSystem, spin_rhs
from .integrate import IntegrationError, IntegratorSettings, integrate
from .model import ChainParams, ConfigurationError, DriveConfig, TimeSeries, initial_state
from .oracle import FreeChainReference, edge_amplitude

log = logging.getLogger(__name__)

KINDS = ("no_interaction", "carrier_only", "jc_only", "constructive", "destructive", "custom")
LABELS = {
    "no_interaction": "No int.",
    "carrier_only": "Carrier",
    "jc_only": "JC",
    "constructive": "CI",
    "destructive": "DI",
    "custom": "custom",
}
WORKERS_ENV = "IONWAVE_WORKERS"


class ReflectionWarning(UserWarning):
    """Amplitude reflected from the far end may reach the driven site in the window."""


@dataclass(frozen=True)
class Scenario:
    kind: str
    phase: float | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigurationError(f"unknown scenario {self.kind!r}; expected one of {KINDS}")
        if self.kind == "custom":
            if self.phase is None or not (0.0 <= self.phase < 2 * math.pi):
                raise ConfigurationError(f"custom phase must lie in [0, 2pi), got {self.phase}")

    @classmethod
    def custom(cls, phase: float) -> "Scenario":
        return cls("custom", phase)

    @property
    def label(self) -> str:
        return LABELS[self.kind] if self.kind != "custom" else f"dphi={self.phase:.4g}"

    @property
    def interference_phase(self) -> float | None:
        return {"constructive": 0.0, "destructive": math.pi, "carrier_only": 0.0}.get(
            self.kind, self.phase)

    def drive(self) -> DriveConfig:
        if self.kind == "no_interaction":
            return DriveConfig.off()
        if self.kind == "jc_only":
            return DriveConfig.jc_only()
        if self.kind == "carrier_only":
            return DriveConfig.tracking(0.0, jc_on=False)
        return DriveConfig.tracking(self.interference_phase)


NO_INTERACTION = Scenario("no_interaction")
CARRIER_ONLY = Scenario("carrier_only")
JC_ONLY = Scenario("jc_only")
CONSTRUCTIVE = Scenario("constructive")
DESTRUCTIVE = Scenario("destructive")
CHAIN_SCENARIOS = (NO_INTERACTION, JC_ONLY, CONSTRUCTIVE, DESTRUCTIVE)
SINGLE_ION_SCENARIOS = (CARRIER_ONLY, JC_ONLY, CONSTRUCTIVE, DESTRUCTIVE)


@dataclass
class RunResult:
    series: TimeSeries
    metrics: dict[str, float]
    provenance: dict = field(default_factory=dict)


def _settings(settings):
    return settings if settings is not None else IntegratorSettings()


# --- single ion -------------------------------------------------------------

def single_ion_drives(scenario: Scenario, alpha: complex, g: float) -> tuple[complex, complex]:
    """(omega_tilde, omega2) for the effective single-ion model.

    The carrier magnitude balances the JC drive, ``|omega2| = g|alpha|``.
    CI and DI fix the sign of alpha (+|alpha| and -|alpha|); ``custom``
    uses ``omega2 = g*alpha*exp(i*phase)``.
    """
    mag = abs(alpha)
    if scenario.kind == "carrier_only":
        return 0j, complex(g * mag)
    if scenario.kind == "jc_only":
        return complex(g * alpha), 0j
    if scenario.kind == "constructive":
        return complex(g * mag), complex(g * mag)
    if scenario.kind == "destructive":
        return complex(-g * mag), complex(g * mag)
    if scenario.kind == "custom":
        return complex(g * alpha), complex(g * alpha) * complex(math.cos(scenario.phase),
                                                                math.sin(scenario.phase))
    return 0j, 0j


def run_single_ion(scenario: Scenario, alpha: complex = 1.0, g: float = 1.0, gt_max: float = 10.0,
                   samples: int = 2001, settings: IntegratorSettings | None = None) -> RunResult:
    """Excited population of one ion under the effective JC + carrier drive."""
    if samples < 2:
        raise ConfigurationError("samples must be >= 2")
    settings = _settings(settings)
    omega_tilde, omega2 = single_ion_drives(scenario, alpha, g)
    w = omega_tilde + omega2

    def rhs(t, s):
        return spin_rhs(w, s)

    def jac(t, s):
        return np.array([[0, 0, -w.imag], [0, 0, -w.real], [w.imag, w.real, 0]])

    times = np.linspace(0.0, gt_max / g if g else gt_max, samples)
    try:
        raw = integrate(rhs, jac, np.array([0.0, 0.0, -1.0]), (0.0, times[-1]), settings, times)
    except IntegrationError as exc:
        raise IntegrationError(f"single-ion {scenario.label}: {exc}", exc.last_time, exc.partial) from exc
    bloch = raw["y"]
    pe = 0.5 * (1.0 + bloch[:, 2])
    norm = np.linalg.norm(bloch, axis=1)
    series = TimeSeries(times * g if g else times,
                        {"P_e": pe, "bloch": bloch, "bloch_norm": norm}, raw.stats)
    metrics = {
        "max_P_e": float(pe.max()),
        "bloch_norm_drift": float(np.max(np.abs(norm - 1.0))),
    }
    provenance = {"experiment": "single_ion", "scenario": scenario.kind, "phase": scenario.phase,
                  "alpha": complex(alpha), "g": g, "gt_max": gt_max, "samples": samples,
                  "omega_tilde": omega_tilde, "omega2": omega2, **_settings_echo(settings)}
    return RunResult(series, metrics, provenance)


# --- chain ------------------------------------------------------------------

def reflection_time(params: ChainParams) -> float:
    """Earliest time a wavefront reflected from site N can return to the driven site.

    The free group velocity is at most 2J sites per unit time.
    """
    if params.hop == 0:
        return math.inf
    distance = (params.n_ions - 1) + (params.n_ions - params.driven_site)
    return distance / (2.0 * params.hop)


def check_reflections(params: ChainParams, jt_max: float, tol: float = 1e-6) -> float:
    """Largest deviation of the free driven-site amplitude from the semi-infinite chain.

    Warns with :class:`ReflectionWarning` if it exceeds ``tol`` inside the window.
    """
    ref = FreeChainReference(params)
    grid = np.linspace(0.0, jt_max, 301)
    dev = max(abs(ref(t) - edge_amplitude(params.driven_site, params.hop * t, params.alpha0))
              for t in grid)
    if dev > tol:
        warnings.warn(
            f"reflections from the chain end reach site {params.driven_site} before "
            f"Jt={jt_max:g} (deviation {dev:.2e}); use more ions",
            ReflectionWarning, stacklevel=3)
    return dev


def chain_observables(raw: TimeSeries, params: ChainParams) -> TimeSeries:
    y = raw["y"]
    n = params.n_ions
    amps = y[:, :n] + 1j * y[:, n:2 * n]
    bloch = y[:, 2 * n:]
    pe = 0.5 * (1.0 + bloch[:, 2])
    sq = np.abs(amps) ** 2
    nxt = sq[:, params.driven_site] if params.driven_site < n else np.zeros(len(raw))
    records = {
        "P_e": pe,
        "alpha_next_sq": nxt,
        "bloch_norm": np.linalg.norm(bloch, axis=1),
        "excitation": sq.sum(axis=1) + pe,
        "amplitudes": amps,
        "bloch": bloch,
    }
    return TimeSeries(raw.times, records, raw.stats)


def chain_metrics(series: TimeSeries, params: ChainParams) -> dict[str, float]:
    """Summary numbers; pure functions of the series."""
    sq = np.abs(series["amplitudes"]) ** 2
    exc = series["excitation"]
    cut = params.driven_site
    return {
        "max_P_e": float(series["P_e"].max()),
        "transmitted_energy": float(sq[-1, cut:].sum()),
        "transmission": float(sq[-1, cut:].sum() / sq[-1].sum()) if sq[-1].sum() > 0 else 0.0,
        "bloch_norm_drift": float(np.max(np.abs(series["bloch_norm"] - 1.0))),
        "excitation_drift": float(np.max(np.abs(exc - exc[0]))),
    }


def run_chain(scenario: Scenario, params: ChainParams | None = None, jt_max: float = 30.0,
              samples: int = 2001, settings: IntegratorSettings | None = None,
              check_boundary: bool = True) -> RunResult:
    """Integrate the driven chain and record P_e, |alpha_{m+1}|^2 and diagnostics."""
    params = params or ChainParams()
    if samples < 2:
        raise ConfigurationError("samples must be >= 2")
    settings = _settings(settings)
    if check_boundary and params.hop > 0 and params.alpha0 != 0:
        check_reflections(params, jt_max)
    drive = scenario.drive()
    reference = FreeChainReference(params) if drive.carrier_on else None
    system = ChainSystem(params, drive, reference)
    times = np.linspace(0.0, jt_max, samples)
    try:
        raw = integrate(system.rhs, system.jacobian, initial_state(params).to_flat(),
                        (0.0, jt_max), settings, times)
    except IntegrationError as exc:
        raise IntegrationError(f"chain {scenario.label}: {exc}", exc.last_time, exc.partial) from exc
    series = chain_observables(raw, params)
    provenance = {"experiment": "chain", "scenario": scenario.kind,
                  "phase": scenario.interference_phase, **_params_echo(params),
                  "jt_max": jt_max, "samples": samples, **_settings_echo(settings)}
    return RunResult(series, chain_metrics(series, params), provenance)


def transmission(result: RunResult, site_cut: int, t: float) -> float:
    """Fraction of phonon number beyond ``site_cut`` (1-based), linearly interpolated in time."""
    series = result.series
    if len(series) == 0:
        raise ValueError("empty series")
    times = series.times
    if not (times[0] <= t <= times[-1]):
        raise ValueError(f"t={t} outside sampled range [{times[0]}, {times[-1]}]")
    sq = np.abs(series["amplitudes"]) ** 2
    total = sq.sum(axis=1)
    frac = np.divide(sq[:, site_cut:].sum(axis=1), total, out=np.zeros_like(total), where=total > 0)
    return float(np.interp(t, times, frac))


def pulse_arrival_time(params: ChainParams, jt_max: float = 30.0, samples: int = 3001) -> float:
    """Time at which the free pulse peaks on the site just past the driven ion."""
    ref = FreeChainReference(params, site=min(params.driven_site + 1, params.n_ions))
    grid = np.linspace(0.0, jt_max, samples)
    return float(grid[np.argmax([abs(ref(t)) for t in grid])])


# --- sweeps -----------------------------------------------------------------

def worker_count() -> int:
    value = os.environ.get(WORKERS_ENV)
    if value:
        return max(1, int(value))
    return os.cpu_count() or 1


def _map(fn, jobs, workers):
    if workers <= 1 or len(jobs) <= 1:
        return [fn(job) for job in jobs]
    with ProcessPoolExecutor(max_workers=min(workers, len(jobs))) as pool:
        return list(pool.map(fn, jobs))


def _phase_point(job):
    phase, params, jt_max, samples, settings = job
    try:
        wrapped = math.fmod(phase, 2 * math.pi)
        wrapped = wrapped + 2 * math.pi if wrapped < 0 else wrapped
        res = run_chain(Scenario.custom(wrapped), params, jt_max, samples, settings,
                        check_boundary=False)
        return {"phase": phase, "max_P_e": res.metrics["max_P_e"],
                "transmission": res.metrics["transmission"], "error": ""}
    except Exception as exc:  # recorded per point; the sweep carries on
        return {"phase": phase, "max_P_e": math.nan, "transmission": math.nan, "error": str(exc)}


def phase_sweep(params: ChainParams | None = None, phases=None, jt_max: float = 30.0,
                samples: int = 601, settings: IntegratorSettings | None = None,
                workers: int | None = None) -> list[dict]:
    """max P_e and transmission versus the interference phase.

    Phases outside [0, 2pi) are reduced modulo 2pi for the drive but
    reported as given. Rows come back sorted by phase.
    """
    params = params or ChainParams()
    phases = np.linspace(0, 2 * math.pi, 64, endpoint=False) if phases is None else np.asarray(phases)
    if phases.size == 0:
        raise ConfigurationError("phase grid is empty")
    jobs = [(float(p), params, jt_max, samples, settings) for p in phases]
    rows = _map(_phase_point, jobs, worker_count() if workers is None else workers)
    return sorted(rows, key=lambda r: r["phase"])


def _blockade_point(job):
    ratio, params, jt_max, samples, settings, scenario = job
    try:
        p = ChainParams(n_ions=params.n_ions, hop=params.hop, coupling=ratio * params.hop,
                        phase=params.phase, alpha0=params.alpha0, driven_site=params.driven_site)
        res = run_chain(scenario, p, jt_max, samples, settings, check_boundary=False)
        return {"ratio": ratio, "transmission": res.metrics["transmission"], "error": ""}
    except Exception as exc:
        return {"ratio": ratio, "transmission": math.nan, "error": str(exc)}


def default_ratios() -> np.ndarray:
    return np.logspace(-1, 2, 16)


def blockade_sweep(params: ChainParams | None = None, ratios=None, jt_max: float = 30.0,
                   samples: int = 601, settings: IntegratorSettings | None = None,
                   scenario: Scenario = JC_ONLY, workers: int | None = None) -> list[dict]:
    """Transmission past the driven ion at ``jt_max`` versus g/J."""
    params = params or ChainParams()
    ratios = default_ratios() if ratios is None else np.asarray(ratios, dtype=float)
    if ratios.size == 0:
        raise ConfigurationError("ratio grid is empty")
    jobs = [(float(r), params, jt_max, samples, settings, scenario) for r in ratios]
    rows = _map(_blockade_point, jobs, worker_count() if workers is None else workers)
    return sorted(rows, key=lambda r: r["ratio"])


# --- provenance -------------------------------------------------------------

def _params_echo(params: ChainParams) -> dict:
    return {k: (complex(v) if k == "alpha0" else v) for k, v in asdict(params).items()}


def _settings_echo(settings: IntegratorSettings) -> dict:
    return {"method": settings.method, "rtol": settings.rtol, "atol": settings.atol}
