"""Exceptional-point sensing with a dissipative qubit-resonator pair.

Closed-form non-Hermitian spectrum and no-jump dynamics, a Lindblad
integrator, quantum-jump trajectories with post-selection, and the
least-squares pipeline that turns post-selected populations into a
sensitivity-versus-detuning power law.
"""

from ._accel import BACKEND
from .dynamics import (
    TimeGrid,
    conditioned_populations,
    integrate_master,
    lindblad_rhs,
    propagate_no_jump,
)
from .estimation import (
    Side,
    condition_record,
    fit_eigenenergy,
    fit_power_law,
    run_sensing_campaign,
    sensitivity_from_fit,
    simulate_measurements,
)
from .model import ComplexEnergy, Density3, PureState2, SystemParams, canonicalize, make_params
from .nh_core import build_hamiltonian, eigensystem, half_splitting, sensitivity_theory, spectrum_sweep
from .trajectories import postselect_no_jump, run_ensemble, sample_trajectory

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "ComplexEnergy",
    "Density3",
    "PureState2",
    "Side",
    "SystemParams",
    "TimeGrid",
    "build_hamiltonian",
    "canonicalize",
    "condition_record",
    "conditioned_populations",
    "eigensystem",
    "fit_eigenenergy",
    "fit_power_law",
    "half_splitting",
    "integrate_master",
    "lindblad_rhs",
    "make_params",
    "postselect_no_jump",
    "propagate_no_jump",
    "run_ensemble",
    "run_sensing_campaign",
    "sample_trajectory",
    "sensitivity_from_fit",
    "sensitivity_theory",
    "simulate_measurements",
    "spectrum_sweep",
]
