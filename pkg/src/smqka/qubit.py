"""Exact single-qubit states, the two encoding operations and projective measurement.

States are pairs of Python complex amplitudes. Every state the protocol
touches has amplitudes in {0, +-1, +-1/sqrt(2), +-i/sqrt(2)}, so double
precision is exact to ~1e-16 and no symbolic arithmetic is needed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

TOLERANCE = 1e-9

_R = 1 / math.sqrt(2)


class Basis(str, Enum):
    """Measurement/preparation basis. Index 0 is the +1 eigenstate."""

    Z = "Z"
    X = "X"
    Y = "Y"


@dataclass(frozen=True)
class PureState:
    amp0: complex
    amp1: complex

    def __post_init__(self):
        for a in (self.amp0, self.amp1):
            if not (math.isfinite(a.real) and math.isfinite(a.imag)):
                raise ValueError(f"non-finite amplitude {a!r}")

    @property
    def norm_squared(self) -> float:
        return abs(self.amp0) ** 2 + abs(self.amp1) ** 2

    def inner(self, other: PureState) -> complex:
        """<self|other>."""
        return self.amp0.conjugate() * other.amp0 + self.amp1.conjugate() * other.amp1

    def __neg__(self) -> PureState:
        return PureState(-self.amp0, -self.amp1)


@dataclass(frozen=True)
class MeasurementOutcome:
    index: int
    collapsed: PureState


_EIGENSTATES: dict[Basis, tuple[PureState, PureState]] = {
    Basis.Z: (PureState(1 + 0j, 0j), PureState(0j, 1 + 0j)),
    Basis.X: (PureState(_R + 0j, _R + 0j), PureState(_R + 0j, -_R + 0j)),
    Basis.Y: (PureState(_R + 0j, 1j * _R), PureState(_R + 0j, -1j * _R)),
}

# Decoy alphabet: |+>, |->, |+y>, |-y>
DECOY_BASES = (Basis.X, Basis.Y)


def _check_bit(bit: int) -> None:
    if bit not in (0, 1):
        raise ValueError(f"expected a bit, got {bit!r}")


def prepare(basis: Basis, index: int) -> PureState:
    """Return eigenstate ``index`` of ``basis``."""
    _check_bit(index)
    return _EIGENSTATES[basis][index]


def apply_encoding(state: PureState, bit: int) -> PureState:
    """Apply I (bit 0) or U = |0><1| - |1><0| (bit 1).

    U maps (a0, a1) to (a1, -a0); in particular U|0> = -|1> and U|1> = |0>.
    """
    _check_bit(bit)
    if bit == 0:
        return state
    return PureState(state.amp1, -state.amp0)


def born_probability(state: PureState, basis: Basis, index: int) -> float:
    return abs(prepare(basis, index).inner(state)) ** 2


def measure(state: PureState, basis: Basis, rng: np.random.Generator) -> MeasurementOutcome:
    """Projective measurement with collapse onto the selected eigenstate."""
    pair = _EIGENSTATES[basis]
    p0 = abs(pair[0].inner(state)) ** 2
    index = 0 if rng.random() < p0 else 1
    return MeasurementOutcome(index, pair[index])


def equal_up_to_phase(a: PureState, b: PureState, tol: float = TOLERANCE) -> bool:
    return abs(a.inner(b)) >= 1 - tol
