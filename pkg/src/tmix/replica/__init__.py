from .energetic import (
    Channel,
    bias_solve_channels,
    channel_energy,
    conjugate_updates_channels,
    conjugate_updates_envelope,
    coupled_channels,
    energetic_term,
    gauss_hermite,
    reweigh_corrupted_channels,
    single_student_channels,
)
from .entropic import (
    entropic_potential_coupled,
    entropic_potential_single,
    entropic_updates,
)
from .kernels import BACKEND, prox_batch
from .solver import fixed_point_solve

__all__ = [
    "BACKEND",
    "Channel",
    "bias_solve_channels",
    "channel_energy",
    "conjugate_updates_channels",
    "conjugate_updates_envelope",
    "coupled_channels",
    "energetic_term",
    "entropic_potential_coupled",
    "entropic_potential_single",
    "entropic_updates",
    "fixed_point_solve",
    "gauss_hermite",
    "prox_batch",
    "reweigh_corrupted_channels",
    "single_student_channels",
]
