"""Atomic system descriptors and electron configurations."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ContractViolationError


@dataclass(frozen=True)
class AtomSpec:
    """Fixed data of the atomic system under study.

    Energies use the convention in which the one-particle kinetic operator is
    the plain (un-halved) Laplacian, so the hydrogenic levels are -Z^2/(4n^2).

    ``prev_ground_energy`` is the ground energy of the system with one
    electron removed (0 for a single electron, where the previous system is
    empty).
    """

    n_electrons: int
    charge: float
    energy: float
    prev_ground_energy: float = 0.0

    def __post_init__(self):
        if self.n_electrons < 1:
            raise ContractViolationError("n_electrons must be >= 1")
        if self.charge <= 0:
            raise ContractViolationError("charge must be positive")

    @property
    def ion_gap(self) -> float:
        """Ionization gap: previous ground energy minus this state's energy."""
        return self.prev_ground_energy - self.energy


def as_configuration(coords, n_electrons: int) -> np.ndarray:
    """Validate and convert electron coordinates to an (n_electrons, 3) array."""
    c = np.asarray(coords, dtype=float)
    if c.shape != (n_electrons, 3):
        raise ContractViolationError(
            f"configuration has shape {c.shape}, expected ({n_electrons}, 3)"
        )
    return c
