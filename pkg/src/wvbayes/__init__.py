"""Weak values, their quantum Bayes duals, and a Mach-Zehnder weak-measurement simulator."""

__version__ = "0.1.0"

from .errors import *  # noqa: F401,F403
from .qcore import Ket, Projector, apply_projector, basis_ket, inner, ket, normalize
from .weakvalues import (
    bayes_decompose,
    geometric_phase,
    imag_via_commutator,
    joint_quasi_probability,
    partial_amplitude_portion,
    sum_rule_check,
    uncertainty_bound_check,
    weak_value,
)
from .mzi import GlassPlacement, MziState, port_probability, theoretical_weak_value, worked_example_state
from .probe import GaussianProbe, port_wave
from .mc import RunConfig, ShiftAccumulator, paired_runs, run_experiment, run_protocol
