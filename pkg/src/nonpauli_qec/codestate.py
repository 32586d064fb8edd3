"""Encoded logical states and logical readout for a single patch.

``|0>_L`` is the normalized projection of ``(|+>_B)^{x n}`` onto the requested
A-tile eigenvalues (B tiles are already +1); ``|1>_L = X_L |0>_L`` with
``X_L`` the S^A chain on column 0.
"""

from __future__ import annotations

import math
from typing import Mapping

import numpy as np

from .algebra import OperatorBasis
from .engine import StateVector
from .lattice import RotatedSurfaceLayout


def logical_zero(
    layout: RotatedSurfaceLayout,
    basis: OperatorBasis,
    a_signs: Mapping[int, int] | None = None,
) -> StateVector:
    """Data-register ``|0>_L`` in the sector with A-tile eigenvalues ``a_signs`` (default all +1)."""
    state = StateVector.product([basis.eig_b_plus] * layout.num_data)
    for t in layout.tiles_of("A"):
        sign = 1 if a_signs is None else a_signs.get(t.tile_id, 1)
        state.project_operator(t.legs(basis), sign)
    return state


def encode(
    layout: RotatedSurfaceLayout,
    basis: OperatorBasis,
    alpha: complex,
    beta: complex,
    a_signs: Mapping[int, int] | None = None,
) -> StateVector:
    """``alpha|0>_L + beta|1>_L`` on the data register (normalized)."""
    zero = logical_zero(layout, basis, a_signs)
    one = zero.copy().apply_legs(layout.x_chain.legs(basis))
    vec = alpha * zero.amplitudes + beta * one.amplitudes
    return StateVector(vec, normalize=True)


def with_ancilla(data: StateVector) -> StateVector:
    """Append one ancilla qubit in ``|0>`` as the most significant qubit."""
    amps = np.zeros(2 * len(data), dtype=np.complex128)
    amps[: len(data)] = data.amplitudes
    return StateVector(amps)


def tensor(*parts: StateVector) -> StateVector:
    """Tensor product with ``parts[0]`` on the lowest qubit indices."""
    vec = np.ones(1, dtype=np.complex128)
    for p in parts:
        vec = np.kron(p.amplitudes, vec)
    return StateVector(vec)


def logical_bloch(state: StateVector, layout: RotatedSurfaceLayout, basis: OperatorBasis, offset: int = 0):
    """``(<X_L>, <Y_L>, <Z_L>)`` with ``Y_L = i X_L Z_L``."""
    xl = layout.x_chain.legs(basis, offset)
    zl = layout.z_chain.legs(basis, offset)
    ex = state.expectation(xl).real
    ez = state.expectation(zl).real
    zpsi = state.copy().apply_legs(zl)
    xzpsi = zpsi.apply_legs(xl)
    ey = (1j * np.vdot(state.amplitudes, xzpsi.amplitudes)).real
    return float(ex), float(ey), float(ez)


def bloch_to_amplitudes(bloch) -> tuple[complex, complex]:
    """Amplitudes ``(a, b)`` with ``a`` real nonnegative for a pure Bloch vector."""
    x, y, z = bloch
    a = math.sqrt(max(0.0, (1.0 + z) / 2.0))
    if a < 1e-12:
        return 0.0 + 0.0j, 1.0 + 0.0j
    b = complex(x, y) / (2.0 * a)
    return complex(a), b
