"""Hadamard-test stabilizer measurement with a single reused ancilla.

Circuit for a product operator ``O = prod_q G_q``::

    anc: |0> -H-[noise]-*--*--...-H-[noise]- M - reset
    q1 : ------------- G1 |
    q2 : ---------------- G2

Controlled legs run in ascending data-qubit order.  Ancilla bit 0 reports +1.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Hashable, Sequence

import numpy as np

from .algebra import OperatorBasis
from .engine import H, StateVector
from .lattice import StabilizerTile
from .noise import as_sampler

ANCILLA_CLEAN_TOL = 1e-12


@dataclass(frozen=True)
class MeasurementRecord:
    label: Hashable
    outcome: int  # +1 / -1
    round: int = 0
    discarded: bool = False


class AncillaNotReset(RuntimeError):
    pass


def hadamard_test(
    state: StateVector,
    legs: Sequence[tuple[int, np.ndarray]],
    noise,
    rng,
    *,
    site: tuple = ("op",),
    ancilla: int | None = None,
) -> int:
    """Measure the +-1 eigenvalue of ``prod legs``; ``noise`` is a :class:`NoiseSampler`."""
    anc = state.num_qubits - 1 if ancilla is None else ancilla
    if state.prob_one(anc) > ANCILLA_CLEAN_TOL:
        raise AncillaNotReset(f"ancilla {anc} is not in |0>")
    state.apply_single(H, anc)
    noise.after_gate(state, anc, site + (0,))
    for q, g in sorted(legs, key=lambda leg: leg[0]):
        state.apply_controlled(g, anc, q)
        noise.after_two_qubit(state, q, site + ("cg", q))
    state.apply_single(H, anc)
    noise.after_gate(state, anc, site + (1,))
    bit = state.measure(anc, rng)
    state.reset(anc)
    noise.after_reset(state, anc, site + ("reset",))
    return 1 - 2 * bit


def measure_stabilizer(
    state: StateVector,
    tile: StabilizerTile,
    basis: OperatorBasis,
    noise,
    rng,
    *,
    round_index: int = 0,
    offset: int = 0,
) -> tuple[int, StateVector]:
    sampler = as_sampler(noise, basis, rng)
    outcome = hadamard_test(state, tile.legs(basis, offset), sampler, rng,
                            site=("tile", tile.tile_id, round_index))
    return outcome, state


def measure_temporary_pair(
    state: StateVector,
    qi: int,
    qj: int,
    basis: OperatorBasis,
    noise,
    rng,
    *,
    site: tuple | None = None,
) -> tuple[int, StateVector]:
    """Measure the weight-2 operator ``S^B_i S^B_j``."""
    if qi == qj:
        raise ValueError("temporary pair needs two distinct qubits")
    sampler = as_sampler(noise, basis, rng)
    site = ("pair", qi, qj) if site is None else site
    outcome = hadamard_test(state, [(qi, basis.s_b), (qj, basis.s_b)], sampler, rng, site=site)
    return outcome, state


def double_measure_with_discard(
    state: StateVector,
    tile: StabilizerTile,
    basis: OperatorBasis,
    noise,
    rng,
    *,
    offset: int = 0,
) -> tuple[int, StateVector, bool]:
    """Measure twice in a row; discard when the two outcomes differ.

    Returns the first-round outcome.
    """
    sampler = as_sampler(noise, basis, rng)
    first, _ = measure_stabilizer(state, tile, basis, sampler, rng, round_index=0, offset=offset)
    second, _ = measure_stabilizer(state, tile, basis, sampler, rng, round_index=1, offset=offset)
    return first, state, first != second
