"""Interference of a carrier drive with a propagating phonon pulse in trapped-ion chains."""

from .dynamics import chain_jacobian, carrier_drive, free_rhs, full_rhs, single_ion_rhs
from .experiments import (CONSTRUCTIVE, DESTRUCTIVE, JC_ONLY, NO_INTERACTION, CARRIER_ONLY,
                          RunResult, Scenario, blockade_sweep, phase_sweep, run_chain,
                          run_single_ion, transmission)
from .integrate import IntegratorSettings, esdirk_step, integrate, rk54_step
from .model import (ChainParams, ChainState, ConfigurationError, DriveConfig, PhysicalPreset,
                    TimeSeries, bloch_norm, effective_coupling, excitation_number,
                    excited_population, initial_state)

__version__ = "0.1.0"
