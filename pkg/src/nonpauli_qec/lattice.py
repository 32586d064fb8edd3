"""Rotated surface code geometry.

Data qubit ``(row, col)`` of a distance-``d`` patch has index ``row*d + col``
(row-major, so for d=3 the top row is 0,1,2).  A plaquette anchored at
``(r, c)`` with ``-1 <= r, c <= d-1`` covers the data qubits at
``(r..r+1, c..c+1)`` that exist.  Plaquette type follows a checkerboard:
``r + c`` odd is A-type (X-like), even is B-type (Z-like).  Weight-2 A tiles sit
on the top/bottom edges and weight-2 B tiles on the left/right edges, so the
logical X chain is column 0 and the logical Z chain is row 0.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .algebra import OperatorBasis, PAULI_BASIS, kron_all
from .engine import I2, StateVector

MIN_DISTANCE = 2
MAX_DISTANCE = 4


@dataclass(frozen=True)
class StabilizerTile:
    tile_id: int
    kind: str  # "A" or "B"
    qubits: tuple[int, ...]
    anchor: tuple[int, int] = (0, 0)

    @property
    def weight(self) -> int:
        return len(self.qubits)

    def legs(self, basis: OperatorBasis, offset: int = 0) -> list[tuple[int, np.ndarray]]:
        g = basis.op(self.kind)
        return [(offset + q, g) for q in self.qubits]


@dataclass(frozen=True)
class LogicalOperator:
    kind: str  # "A" chain (X-like) or "B" chain (Z-like)
    qubits: tuple[int, ...]

    def legs(self, basis: OperatorBasis, offset: int = 0) -> list[tuple[int, np.ndarray]]:
        g = basis.op(self.kind)
        return [(offset + q, g) for q in self.qubits]


@dataclass(frozen=True)
class RotatedSurfaceLayout:
    distance: int
    tiles: tuple[StabilizerTile, ...]
    coords: tuple[tuple[int, int], ...] = field(repr=False)

    @property
    def num_data(self) -> int:
        return self.distance ** 2

    @property
    def ancilla_index(self) -> int:
        return self.num_data

    def tiles_of(self, kind: str) -> list[StabilizerTile]:
        return [t for t in self.tiles if t.kind == kind]

    def tile(self, tile_id: int) -> StabilizerTile:
        return self.tiles[tile_id]

    def canonical_order(self) -> list[StabilizerTile]:
        """A-type tiles by id, then B-type tiles by id."""
        return self.tiles_of("A") + self.tiles_of("B")

    def qubit(self, row: int, col: int) -> int:
        return row * self.distance + col

    @property
    def x_chain(self) -> LogicalOperator:
        return LogicalOperator("A", tuple(self.qubit(r, 0) for r in range(self.distance)))

    @property
    def z_chain(self) -> LogicalOperator:
        return LogicalOperator("B", tuple(self.qubit(0, c) for c in range(self.distance)))

    def incident(self, q: int, kind: str) -> list[StabilizerTile]:
        return [t for t in self.tiles if t.kind == kind and q in t.qubits]


def _plaquette_kind(r: int, c: int) -> str:
    return "A" if (r + c) % 2 else "B"


def build_layout(d: int) -> RotatedSurfaceLayout:
    if not MIN_DISTANCE <= d <= MAX_DISTANCE:
        raise ValueError(f"distance {d} outside supported range {MIN_DISTANCE}..{MAX_DISTANCE}")
    tiles = []
    for r in range(-1, d):
        for c in range(-1, d):
            cells = [(rr, cc) for rr in (r, r + 1) for cc in (c, c + 1)
                     if 0 <= rr < d and 0 <= cc < d]
            kind = _plaquette_kind(r, c)
            if len(cells) == 4:
                pass
            elif len(cells) == 2:
                top_bottom = r in (-1, d - 1)
                if (kind == "A") != top_bottom:
                    continue
            else:
                continue
            qubits = tuple(sorted(rr * d + cc for rr, cc in cells))
            tiles.append(StabilizerTile(len(tiles), kind, qubits, (r, c)))
    coords = tuple((q // d, q % d) for q in range(d * d))
    return RotatedSurfaceLayout(distance=d, tiles=tuple(tiles), coords=coords)


def logical_chains(layout: RotatedSurfaceLayout) -> tuple[LogicalOperator, LogicalOperator]:
    return layout.x_chain, layout.z_chain


# -- initial-state analysis -------------------------------------------------

INIT_KINDS = ("ground", "plus_A", "plus_B", "chain")


def protocol1_init_spec(layout: RotatedSurfaceLayout) -> list[str]:
    chain = set(layout.x_chain.qubits)
    return ["chain" if q in chain else "plus_B" for q in range(layout.num_data)]


def protocol2_init_spec(layout: RotatedSurfaceLayout) -> list[str]:
    return ["ground"] * layout.num_data


def chain_pairs(layout: RotatedSurfaceLayout, members: Sequence[int] | None = None) -> list[tuple[int, int]]:
    """Adjacent pairs along the logical X chain, restricted to ``members`` if given."""
    chain = [q for q in layout.x_chain.qubits if members is None or q in members]
    return list(zip(chain[:-1], chain[1:]))


def initial_data_state(
    layout: RotatedSurfaceLayout,
    init_spec: Sequence[str],
    basis: OperatorBasis,
    chain_state=None,
) -> StateVector:
    """Noiseless data-register state described by ``init_spec``.

    Chain members start in ``chain_state`` (default ``|0>``) and are post-selected on
    ``S^B_i S^B_j = +1`` for each adjacent pair along the X chain.
    """
    if len(init_spec) != layout.num_data:
        raise ValueError("init_spec must name one state per data qubit")
    ground = np.array([1.0, 0.0], dtype=np.complex128)
    chain_vec = ground if chain_state is None else np.asarray(chain_state, dtype=np.complex128)
    vecs = []
    for kind in init_spec:
        if kind == "ground":
            vecs.append(ground)
        elif kind == "plus_A":
            vecs.append(basis.eig_a_plus)
        elif kind == "plus_B":
            vecs.append(basis.eig_b_plus)
        elif kind == "chain":
            vecs.append(chain_vec)
        else:
            raise ValueError(f"unknown init kind {kind!r}")
    state = StateVector.product(vecs)
    members = [q for q, k in enumerate(init_spec) if k == "chain"]
    for i, j in chain_pairs(layout, members):
        state.project_operator([(i, basis.s_b), (j, basis.s_b)], +1)
    return state


def deterministic_tiles(
    layout: RotatedSurfaceLayout,
    init_spec: Sequence[str],
    basis: OperatorBasis,
    chain_state=None,
    tol: float = 1e-9,
) -> list[tuple[int, int]]:
    """Tiles whose first-round noiseless outcome is fixed, with the expected value (+1/-1)."""
    state = initial_data_state(layout, init_spec, basis, chain_state)
    out = []
    for t in layout.tiles:
        ev = state.expectation(t.legs(basis)).real
        if abs(ev - 1.0) < tol:
            out.append((t.tile_id, 1))
        elif abs(ev + 1.0) < tol:
            out.append((t.tile_id, -1))
    return out


# -- validation ---------------------------------------------------------------


@dataclass
class LayoutReport:
    violations: list[str]
    checked_pairs: int = 0

    @property
    def passed(self) -> bool:
        return not self.violations


def _support_violations(layout: RotatedSurfaceLayout) -> list[str]:
    d = layout.distance
    n = layout.num_data
    out = []
    if len(layout.tiles) != n - 1:
        out.append(f"expected {n - 1} tiles, found {len(layout.tiles)}")
    for t in layout.tiles:
        if t.kind not in ("A", "B"):
            out.append(f"tile {t.tile_id}: unknown kind {t.kind!r}")
        if t.weight not in (2, 4):
            out.append(f"tile {t.tile_id}: weight {t.weight}")
        if len(set(t.qubits)) != t.weight or not all(0 <= q < n for q in t.qubits):
            out.append(f"tile {t.tile_id}: qubits {t.qubits} not distinct/in range")
    for i, a in enumerate(layout.tiles):
        for b in layout.tiles[i + 1:]:
            shared = len(set(a.qubits) & set(b.qubits))
            if a.kind != b.kind and shared not in (0, 2):
                out.append(f"tiles {a.tile_id},{b.tile_id}: distinct kinds share {shared} qubits")
            if a.kind == b.kind and shared > 1:
                out.append(f"tiles {a.tile_id},{b.tile_id}: same kind share {shared} qubits")
    for q in range(n):
        for kind in ("A", "B"):
            k = len(layout.incident(q, kind))
            if not 1 <= k <= 2:
                out.append(f"qubit {q}: in {k} {kind}-tiles")
    x, z = layout.x_chain, layout.z_chain
    if len(x.qubits) != d or len(z.qubits) != d:
        out.append("logical chains must have length d")
    return out


def _dense_operator(legs, n: int) -> np.ndarray:
    ops = [I2] * n
    for q, g in legs:
        ops[q] = g
    # kron_all puts ops[0] in the most significant position; reverse for little-endian
    return kron_all(list(reversed(ops)))


def operators_commute(legs_a, legs_b, n: int, *, dense: bool, rng=None, tol=1e-10) -> tuple[bool, float]:
    """Numerically test whether two product operators commute (returns sign agreement and residual)."""
    if dense:
        a = _dense_operator(legs_a, n)
        b = _dense_operator(legs_b, n)
        r = float(np.max(np.abs(a @ b - b @ a)))
        return r < tol, r
    rng = rng if rng is not None else np.random.default_rng(0)
    vec = rng.normal(size=1 << n) + 1j * rng.normal(size=1 << n)
    psi = StateVector(vec, normalize=True)
    ab = psi.copy().apply_legs(legs_b).apply_legs(legs_a)
    ba = psi.copy().apply_legs(legs_a).apply_legs(legs_b)
    r = float(np.max(np.abs(ab.amplitudes - ba.amplitudes)))
    return r < tol, r


def validate_layout(layout: RotatedSurfaceLayout, basis: OperatorBasis = PAULI_BASIS) -> LayoutReport:
    """Check structural invariants, then commutation of every tile pair and of tiles with logicals.

    Commutation uses dense matrices for d=2 and random-statevector tests beyond.
    """
    violations = _support_violations(layout)
    n = layout.num_data
    dense = n <= 4
    rng = np.random.default_rng(12345)
    ops = [(f"tile {t.tile_id}", t.legs(basis)) for t in layout.tiles]
    logicals = [("X_L", layout.x_chain.legs(basis)), ("Z_L", layout.z_chain.legs(basis))]
    pairs = 0
    for i, (na, la) in enumerate(ops):
        for nb, lb in ops[i + 1:] + logicals:
            ok, r = operators_commute(la, lb, n, dense=dense, rng=rng)
            pairs += 1
            if not ok:
                violations.append(f"{na} and {nb} do not commute (residual {r:.2e})")
    # the two logical chains must anticommute
    xl, zl = logicals[0][1], logicals[1][1]
    if dense:
        a, b = _dense_operator(xl, n), _dense_operator(zl, n)
        anti = float(np.max(np.abs(a @ b + b @ a)))
    else:
        psi = StateVector(rng.normal(size=1 << n) + 1j * rng.normal(size=1 << n), normalize=True)
        ab = psi.copy().apply_legs(zl).apply_legs(xl)
        ba = psi.copy().apply_legs(xl).apply_legs(zl)
        anti = float(np.max(np.abs(ab.amplitudes + ba.amplitudes)))
    if anti > 1e-10:
        violations.append(f"logical chains do not anticommute (residual {anti:.2e})")
    return LayoutReport(violations=violations, checked_pairs=pairs)


def format_layout(layout: RotatedSurfaceLayout) -> str:
    lines = [f"# distance {layout.distance}: {layout.num_data} data qubits, ancilla {layout.ancilla_index}"]
    for t in layout.tiles:
        lines.append(f"{t.tile_id} {t.kind} " + " ".join(str(q) for q in t.qubits))
    lines.append("X_L " + " ".join(str(q) for q in layout.x_chain.qubits))
    lines.append("Z_L " + " ".join(str(q) for q in layout.z_chain.qubits))
    return "\n".join(lines)
