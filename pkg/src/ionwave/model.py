"""Domain types, state construction and observables.

Simulation units are dimensionless: chain runs measure time in units of
1/J (axis ``Jt``), single-ion runs in units of 1/g (axis ``gt``).
:class:`PhysicalPreset` only exists to turn lab numbers into these units.

The flat real layout used by every integrator is::

    y = [Re a_1 .. Re a_N, Im a_1 .. Im a_N, s_x, s_y, s_z]

Only the driven ion carries a Bloch vector; undriven ions stay in the
electronic ground state for all time and are not stored.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np


class ConfigurationError(ValueError):
    """Raised when parameters violate a model invariant."""


@dataclass(frozen=True)
class PhysicalPreset:
    """Lab-frame parameters (angular frequencies, any consistent unit).

    ``rabi1 = 0`` is accepted and means the sideband laser is off.
    """

    eta: float = 0.2
    rabi1: float = 0.8e6 * 2 * math.pi
    rabi2_scale: float = 0.16e6 * 2 * math.pi
    hop: float = 3e3 * 2 * math.pi

    def __post_init__(self):
        if not (0 < self.eta <= 0.25):
            raise ConfigurationError(f"eta must satisfy 0 < eta <= 0.25, got {self.eta}")
        if self.rabi1 < 0:
            raise ConfigurationError(f"rabi1 must be non-negative, got {self.rabi1}")
        if self.rabi2_scale <= 0:
            raise ConfigurationError(f"rabi2_scale must be positive, got {self.rabi2_scale}")
        if self.hop <= 0:
            raise ConfigurationError(f"hop must be positive, got {self.hop}")


def effective_coupling(preset: PhysicalPreset) -> float:
    """JC coupling ``g = eta * rabi1``."""
    return preset.eta * preset.rabi1


def balance_amplitude(preset: PhysicalPreset) -> float:
    """Coherent amplitude |alpha| at which carrier and JC drives balance.

    Returns ``inf`` when the sideband laser is off.
    """
    g = effective_coupling(preset)
    return math.inf if g == 0 else preset.rabi2_scale / g


def coupling_ratio(preset: PhysicalPreset) -> float:
    """Dimensionless g/J for a lab preset."""
    return effective_coupling(preset) / preset.hop


@dataclass(frozen=True)
class ChainParams:
    """Static description of the driven chain.

    ``driven_site`` is 1-based and defaults to ``(n_ions + 1) // 2``.
    """

    n_ions: int = 100
    hop: float = 1.0
    coupling: float = 1.0
    phase: float = math.pi
    alpha0: complex = 1.0 + 0.0j
    driven_site: int | None = None

    def __post_init__(self):
        if int(self.n_ions) != self.n_ions or self.n_ions < 1:
            raise ConfigurationError(f"n_ions must be a positive integer, got {self.n_ions}")
        object.__setattr__(self, "n_ions", int(self.n_ions))
        object.__setattr__(self, "alpha0", complex(self.alpha0))
        if self.driven_site is None:
            object.__setattr__(self, "driven_site", (self.n_ions + 1) // 2)
        if not (1 <= self.driven_site <= self.n_ions):
            raise ConfigurationError(
                f"driven_site must lie in [1, n_ions={self.n_ions}], got {self.driven_site}"
            )
        if self.hop < 0:
            raise ConfigurationError(f"hop must be >= 0, got {self.hop}")
        if self.coupling < 0:
            raise ConfigurationError(f"coupling must be >= 0, got {self.coupling}")

    @property
    def dim(self) -> int:
        return 2 * self.n_ions + 3

    @property
    def m(self) -> int:
        """0-based index of the driven site."""
        return self.driven_site - 1


@dataclass(frozen=True)
class ChainState:
    amplitudes: np.ndarray
    bloch: tuple[float, float, float]

    def __post_init__(self):
        amps = np.array(self.amplitudes, dtype=complex).reshape(-1)
        amps.setflags(write=False)
        object.__setattr__(self, "amplitudes", amps)
        bloch = tuple(float(v) for v in self.bloch)
        if len(bloch) != 3:
            raise ConfigurationError("bloch must have exactly three components")
        object.__setattr__(self, "bloch", bloch)

    @property
    def n_ions(self) -> int:
        return self.amplitudes.size

    def to_flat(self) -> np.ndarray:
        return np.concatenate([self.amplitudes.real, self.amplitudes.imag, self.bloch])

    @classmethod
    def from_flat(cls, y: np.ndarray) -> "ChainState":
        y = np.asarray(y, dtype=float)
        n = (y.size - 3) // 2
        if 2 * n + 3 != y.size:
            raise ConfigurationError(f"flat state length {y.size} is not 2N+3")
        return cls(y[:n] + 1j * y[n:2 * n], tuple(y[2 * n:]))


def initial_state(params: ChainParams) -> ChainState:
    """Coherent pulse on site 1, vacuum elsewhere, driven ion in |g>."""
    amps = np.zeros(params.n_ions, dtype=complex)
    amps[0] = params.alpha0
    return ChainState(amps, (0.0, 0.0, -1.0))


def excited_population(state: ChainState) -> float:
    return 0.5 * (1.0 + state.bloch[2])


def excitation_number(state: ChainState) -> float:
    """Phonon number plus electronic excitation; conserved when the carrier is off."""
    return float(np.sum(np.abs(state.amplitudes) ** 2)) + excited_population(state)


def bloch_norm(state: ChainState) -> float:
    return math.sqrt(sum(v * v for v in state.bloch))


@dataclass(frozen=True)
class DriveConfig:
    """Which lasers act on the driven ion and how the carrier is shaped.

    ``carrier_mode`` is ``"constant"`` (fixed ``omega2``) or ``"tracking"``
    (``omega2(t) = g * a_m_free(t) * exp(i * phase)``).
    """

    jc_on: bool = True
    carrier_on: bool = True
    carrier_mode: str = "tracking"
    omega2: complex = 0.0j
    phase: float = math.pi

    def __post_init__(self):
        if self.carrier_mode not in ("constant", "tracking"):
            raise ConfigurationError(f"unknown carrier_mode {self.carrier_mode!r}")
        object.__setattr__(self, "omega2", complex(self.omega2))

    @classmethod
    def constant(cls, omega2: complex, jc_on: bool = True) -> "DriveConfig":
        return cls(jc_on=jc_on, carrier_on=True, carrier_mode="constant", omega2=omega2)

    @classmethod
    def tracking(cls, phase: float, jc_on: bool = True) -> "DriveConfig":
        return cls(jc_on=jc_on, carrier_on=True, carrier_mode="tracking", phase=phase)

    @classmethod
    def off(cls) -> "DriveConfig":
        return cls(jc_on=False, carrier_on=False)

    @classmethod
    def jc_only(cls) -> "DriveConfig":
        return cls(jc_on=True, carrier_on=False)


@dataclass
class TimeSeries:
    """Observables sampled on a strictly increasing time grid.

    Every array in ``records`` has the time axis first.
    """

    times: np.ndarray
    records: dict[str, np.ndarray] = field(default_factory=dict)
    stats: dict[str, float] = field(default_factory=dict)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        if self.times.ndim != 1:
            raise ValueError("times must be one-dimensional")
        if self.times.size > 1 and np.any(np.diff(self.times) <= 0):
            raise ValueError("times must be strictly increasing")
        for name, values in self.records.items():
            if len(values) != self.times.size:
                raise ValueError(
                    f"record {name!r} has {len(values)} rows for {self.times.size} times"
                )

    def __len__(self):
        return self.times.size

    def __getitem__(self, name: str) -> np.ndarray:
        return self.records[name]

    def with_records(self, extra: Mapping[str, np.ndarray]) -> "TimeSeries":
        return TimeSeries(self.times, {**self.records, **extra}, dict(self.stats))
