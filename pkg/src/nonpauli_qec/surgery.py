"""Lattice surgery between patches whose stabilizers live in different bases.

A rough merge measures ``X_L^P X_L^Q`` through seam tiles that pair P's rightmost
column with Q's leftmost column row by row; each seam leg uses its own patch's A
operator (X on a Pauli patch, S^A on a non-Pauli one).  A smooth merge does the same
with P's bottom row, Q's top row and B operators, measuring ``Z_L^P Z_L^Q``.

Patch tiles that anticommute with some seam tile are "dropped" while merged; the
split measures every patch tile once and repairs the dropped-tile syndrome by
applying a product of seam operators found over GF(2).

Register layout: patches sit at their ``offset`` in one register and the shared
measurement ancilla is the last qubit.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .algebra import OperatorBasis, PAULI_BASIS
from .circuits import hadamard_test
from .codestate import encode, tensor
from .engine import StateVector, fidelity
from .lattice import RotatedSurfaceLayout, StabilizerTile, _dense_operator, build_layout
from .noise import as_sampler

BOUNDARIES = ("rough", "smooth")
SURGERY_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class Patch:
    name: str
    layout: RotatedSurfaceLayout
    basis: OperatorBasis
    offset: int

    @property
    def distance(self) -> int:
        return self.layout.distance

    def qubit(self, row: int, col: int) -> int:
        return self.offset + self.layout.qubit(row, col)

    def legs(self, tile: StabilizerTile):
        return tile.legs(self.basis, self.offset)

    @property
    def x_legs(self):
        return self.layout.x_chain.legs(self.basis, self.offset)

    @property
    def z_legs(self):
        return self.layout.z_chain.legs(self.basis, self.offset)

    def logical_legs(self, kind: str):
        return self.x_legs if kind == "A" else self.z_legs

    def encode(self, alpha: complex, beta: complex) -> StateVector:
        """Data-register code state ``alpha|0>_L + beta|1>_L`` of this patch alone."""
        return encode(self.layout, self.basis, alpha, beta)


@dataclass(frozen=True)
class SeamTile:
    seam_id: int
    kind: str  # "A" for rough seams, "B" for smooth
    p_qubits: tuple[int, ...]
    q_qubits: tuple[int, ...]

    @property
    def weight(self) -> int:
        return len(self.p_qubits) + len(self.q_qubits)


@dataclass(eq=False)
class MergedLayout:
    patch_p: Patch
    patch_q: Patch
    seam_tiles: list[SeamTile]
    boundary_kind: str
    ancilla: int
    # patch tiles commuting with every seam tile, and the rest
    retained: list[tuple[Patch, StabilizerTile]] = field(default_factory=list)
    dropped: list[tuple[Patch, StabilizerTile]] = field(default_factory=list)
    # anticommutation[i, j] = 1 when seam tile i anticommutes with dropped tile j
    anticommutation: np.ndarray = field(default_factory=lambda: np.zeros((0, 0), dtype=np.uint8))

    @property
    def num_qubits(self) -> int:
        return self.ancilla + 1

    @property
    def seam_kind(self) -> str:
        return "A" if self.boundary_kind == "rough" else "B"

    def seam_legs(self, seam: SeamTile):
        k = seam.kind
        return ([(q, self.patch_p.basis.op(k)) for q in seam.p_qubits]
                + [(q, self.patch_q.basis.op(k)) for q in seam.q_qubits])

    def joint_logical_legs(self):
        k = self.seam_kind
        return self.patch_p.logical_legs(k) + self.patch_q.logical_legs(k)

    def patch_tiles(self) -> list[tuple[Patch, StabilizerTile]]:
        return ([(self.patch_p, t) for t in self.patch_p.layout.canonical_order()]
                + [(self.patch_q, t) for t in self.patch_q.layout.canonical_order()])

    def describe(self) -> str:
        lines = [f"# {self.boundary_kind} merge, distance {self.patch_p.distance},"
                 f" P offset {self.patch_p.offset}, Q offset {self.patch_q.offset}, ancilla {self.ancilla}"]
        for s in self.seam_tiles:
            lines.append(f"seam {s.seam_id} {s.kind} P:" + ",".join(map(str, s.p_qubits))
                         + " Q:" + ",".join(map(str, s.q_qubits)))
        for patch, t in self.dropped:
            lines.append(f"dropped {patch.name}.{t.tile_id} {t.kind} "
                         + " ".join(str(patch.offset + q) for q in t.qubits))
        return "\n".join(lines)


class SeamConstructionError(RuntimeError):
    pass


# -- construction ---------------------------------------------------------------


def _block_partitions(n: int):
    """Splits of ``range(n)`` into consecutive blocks of size 1 or 2; size 1 only at the ends."""
    def rec(start: int):
        if start == n:
            yield []
            return
        for size in (1, 2):
            if start + size > n:
                continue
            if size == 1 and 0 < start < n - 1:
                continue
            for rest in rec(start + size):
                yield [tuple(range(start, start + size))] + rest
    parts = list(rec(0))
    parts.sort(key=lambda p: sum(len(b) == 1 for b in p))
    return parts


def _anticommute(legs_a, legs_b) -> bool:
    """Sign test for two product operators whose shared factors pairwise commute or anticommute."""
    gb = dict(legs_b)
    flips = 0
    for q, ga in legs_a:
        g = gb.get(q)
        if g is None:
            continue
        ab, ba = ga @ g, g @ ga
        if np.allclose(ab, -ba, atol=1e-12):
            flips += 1
        elif not np.allclose(ab, ba, atol=1e-12):
            raise ValueError(f"factors on qubit {q} neither commute nor anticommute")
    return bool(flips % 2)


def _gf2_rank(mat: np.ndarray) -> int:
    m = mat.copy() % 2
    rank = 0
    rows, cols = m.shape
    for c in range(cols):
        pivot = next((r for r in range(rank, rows) if m[r, c]), None)
        if pivot is None:
            continue
        m[[rank, pivot]] = m[[pivot, rank]]
        for r in range(rows):
            if r != rank and m[r, c]:
                m[r] ^= m[rank]
        rank += 1
    return rank


def _seam_tiles(p: Patch, q: Patch, kind: str, blocks) -> list[SeamTile]:
    d = p.distance
    tiles = []
    for i, block in enumerate(blocks):
        if kind == "A":  # P's last column against Q's first column, by row
            pq = tuple(p.qubit(r, d - 1) for r in block)
            qq = tuple(q.qubit(r, 0) for r in block)
        else:  # P's last row against Q's first row, by column
            pq = tuple(p.qubit(d - 1, c) for c in block)
            qq = tuple(q.qubit(0, c) for c in block)
        tiles.append(SeamTile(i, kind, pq, qq))
    return tiles


def _classify(merged: MergedLayout) -> bool:
    """Fill retained/dropped lists; True when the seam is consistent."""
    seams = [merged.seam_legs(s) for s in merged.seam_tiles]
    for i, a in enumerate(seams):
        for b in seams[i + 1:]:
            if _anticommute(a, b):
                return False
    retained, dropped, cols = [], [], []
    for patch, t in merged.patch_tiles():
        col = [int(_anticommute(s, patch.legs(t))) for s in seams]
        if any(col):
            dropped.append((patch, t))
            cols.append(col)
        else:
            retained.append((patch, t))
    mat = np.array(cols, dtype=np.uint8).T if cols else np.zeros((len(seams), 0), dtype=np.uint8)
    # the full seam product commutes with every patch tile, and no other product does
    if mat.size and (mat.sum(axis=0) % 2).any():
        return False
    if mat.size and _gf2_rank(mat) != len(seams) - 1:
        return False
    merged.retained, merged.dropped, merged.anticommutation = retained, dropped, mat
    return True


def merge_patches(patch_p: Patch, patch_q: Patch, boundary_kind: str = "rough",
                  ancilla: int | None = None) -> MergedLayout:
    """Search for a seam tiling between two equal-distance patches and validate it."""
    if boundary_kind not in BOUNDARIES:
        raise ValueError(f"boundary kind must be one of {BOUNDARIES}")
    if patch_p.distance != patch_q.distance:
        raise ValueError("patches must have the same distance")
    kind = "A" if boundary_kind == "rough" else "B"
    if ancilla is None:
        ancilla = max(patch_p.offset, patch_q.offset) + patch_p.layout.num_data
    for blocks in _block_partitions(patch_p.distance):
        merged = MergedLayout(patch_p, patch_q, _seam_tiles(patch_p, patch_q, kind, blocks),
                              boundary_kind, ancilla)
        if _classify(merged) and check_seam_product(merged) < SURGERY_TOL:
            return merged
    raise SeamConstructionError(f"no valid {boundary_kind} seam for distance {patch_p.distance}")


def build_merged_layout(d: int, boundary_kind: str = "rough",
                        basis_q: OperatorBasis | None = None,
                        basis_p: OperatorBasis = PAULI_BASIS) -> MergedLayout:
    """Two distance-``d`` patches P (offset 0) and Q (offset d^2) with ancilla 2d^2."""
    if d not in (2, 3):
        raise ValueError(f"merged layouts support d in (2, 3), got {d}")
    layout = build_layout(d)
    p = Patch("P", layout, basis_p, 0)
    q = Patch("Q", layout, PAULI_BASIS if basis_q is None else basis_q, d * d)
    return merge_patches(p, q, boundary_kind, ancilla=2 * d * d)


# -- operator checks ---------------------------------------------------------------


def _random_code_states(merged: MergedLayout, rng, count: int):
    for _ in range(count):
        amps = []
        for _patch in (merged.patch_p, merged.patch_q):
            v = rng.normal(size=2) + 1j * rng.normal(size=2)
            amps.append(v / np.linalg.norm(v))
        yield joint_code_state(merged, amps[0], amps[1])


def check_seam_product(merged: MergedLayout, rng=None, samples: int = 3) -> float:
    """Largest deviation between (seam product)|psi> and (joint logical)|psi> over random code states."""
    rng = np.random.default_rng(2024) if rng is None else rng
    seam_legs = [leg for s in merged.seam_tiles for leg in merged.seam_legs(s)]
    worst = 0.0
    for psi in _random_code_states(merged, rng, samples):
        a = psi.copy().apply_legs(seam_legs)
        b = psi.copy().apply_legs(merged.joint_logical_legs())
        worst = max(worst, float(np.max(np.abs(a.amplitudes - b.amplitudes))))
    return worst


def dense_seam_check(merged: MergedLayout) -> dict[str, float]:
    """Dense-matrix residuals on the data registers of both patches (intended for d=2).

    ``product``: ``||(S - L) Pi_code||`` with ``S`` the seam product, ``L`` the joint
    logical and ``Pi_code`` the projector onto both code spaces.  ``commutation``: the
    largest commutator of a seam tile with a retained tile.
    """
    n = merged.ancilla
    if n > 10:
        raise ValueError("dense check limited to 10 data qubits")
    dim = 1 << n
    proj = np.eye(dim, dtype=np.complex128)
    for patch, t in merged.patch_tiles():
        proj = proj @ ((np.eye(dim) + _dense_operator(patch.legs(t), n)) / 2)
    seam = np.eye(dim, dtype=np.complex128)
    for s in merged.seam_tiles:
        seam = seam @ _dense_operator(merged.seam_legs(s), n)
    logical = _dense_operator(merged.joint_logical_legs(), n)
    comm = 0.0
    for s in merged.seam_tiles:
        a = _dense_operator(merged.seam_legs(s), n)
        for patch, t in merged.retained:
            b = _dense_operator(patch.legs(t), n)
            comm = max(comm, float(np.max(np.abs(a @ b - b @ a))))
    return {"product": float(np.max(np.abs((seam - logical) @ proj))),
            "commutation": comm,
            "code_dimension": float(np.trace(proj).real)}


# -- states -------------------------------------------------------------------------


def joint_code_state(merged: MergedLayout, psi_p, psi_q) -> StateVector:
    """``|psi_P>|psi_Q>|0>_anc`` for amplitude pairs ``psi_p``, ``psi_q``."""
    return _register(merged.ancilla, [(merged.patch_p, merged.patch_p.encode(*psi_p)),
                                      (merged.patch_q, merged.patch_q.encode(*psi_q))])


def _register(ancilla: int, parts: Sequence[tuple[Patch, StateVector]]) -> StateVector:
    """Place patch states at their offsets; unused qubits and the ancilla are ``|0>``."""
    ordered = sorted(parts, key=lambda pp: pp[0].offset)
    zero = StateVector(np.array([1.0, 0.0]))
    pieces, pos = [], 0
    for patch, st in ordered:
        if patch.offset < pos:
            raise ValueError("patches overlap")
        pieces += [zero] * (patch.offset - pos) + [st]
        pos = patch.offset + patch.layout.num_data
    if pos > ancilla:
        raise ValueError("ancilla index inside a patch")
    pieces += [zero] * (ancilla - pos) + [zero]
    return tensor(*pieces)


def merged_state_reference(merged: MergedLayout, psi_p, psi_q, m: int, *,
                           seam_outcomes: Sequence[int] | None = None,
                           perspective: str = "P") -> StateVector:
    """Noiseless merged state for logical inputs ``psi_p = (a_P, b_P)``, ``psi_q = (a_Q, b_Q)``.

    ``perspective="P"`` expands over P's logical basis::

        |0>_P (a_P|psi>_Q + (-1)^m b_P L_Q|psi>_Q) + |1>_P (b_P|psi>_Q + (-1)^m a_P L_Q|psi>_Q)

    for a rough merge (``L = X_L``); ``"Q"`` expands over Q's basis symmetrically.  For
    smooth merges (``L = Z_L``) both perspectives use the diagonal form.  When
    ``seam_outcomes`` are given the state is further projected onto them.
    """
    if m not in (0, 1):
        raise ValueError("m must be 0 or 1")
    sign = -1 if m else 1
    p, q = merged.patch_p, merged.patch_q
    if perspective not in ("P", "Q"):
        raise ValueError("perspective must be 'P' or 'Q'")
    first, second = (p, q) if perspective == "P" else (q, p)
    a1, b1 = psi_p if perspective == "P" else psi_q
    other = psi_q if perspective == "P" else psi_p
    psi2 = second.encode(*other)
    l2 = psi2.copy().apply_legs(
        [(qq - second.offset, g) for qq, g in second.logical_legs(merged.seam_kind)])
    zero1, one1 = first.encode(1, 0), first.encode(0, 1)
    if merged.boundary_kind == "rough":
        # X_L|0> = |1>, so the L_first factor moves amplitude between basis states
        c0 = StateVector(a1 * psi2.amplitudes + sign * b1 * l2.amplitudes)
        c1 = StateVector(b1 * psi2.amplitudes + sign * a1 * l2.amplitudes)
    else:
        # Z_L|x> = (-1)^x |x>
        c0 = StateVector(a1 * (psi2.amplitudes + sign * l2.amplitudes))
        c1 = StateVector(b1 * (psi2.amplitudes - sign * l2.amplitudes))
    total = None
    for basis_state, coeff in ((zero1, c0), (one1, c1)):
        part = _register(merged.ancilla, [(first, basis_state), (second, coeff)])
        total = part.amplitudes if total is None else total + part.amplitudes
    if np.linalg.norm(total) < 1e-12:
        raise ValueError(f"merge outcome m={m} has zero probability for these inputs")
    state = StateVector(total, normalize=True)
    if seam_outcomes is not None:
        for s, out in zip(merged.seam_tiles, seam_outcomes):
            state.project_operator(merged.seam_legs(s), out)
    return state


def merge_probability(merged: MergedLayout, psi_p, psi_q, m: int) -> float:
    """``<psi|(1 + (-1)^m L_P L_Q)/2|psi>`` from the encoded product state."""
    psi = joint_code_state(merged, psi_p, psi_q)
    ev = psi.expectation(merged.joint_logical_legs()).real
    return (1.0 + (-1) ** m * ev) / 2.0


# -- circuits -------------------------------------------------------------------


@dataclass
class MergeOutcome:
    m: int
    seam_outcomes: list[int]
    rounds: int
    raw: list[list[int]] = field(default_factory=list)
    sequence: list[int] = field(default_factory=list)  # every outcome in measurement order


@dataclass
class SplitOutcome:
    tile_outcomes: list[int]
    correction: tuple[int, ...]
    consistent: bool


def merge_measure(state: StateVector, merged: MergedLayout, noise=None, rng=None, *,
                  rounds: int | None = None) -> tuple[MergeOutcome, StateVector]:
    """Measure every seam tile ``rounds`` times (default d) and take a per-tile majority."""
    rounds = merged.patch_p.distance if rounds is None else rounds
    if rounds < 1:
        raise ValueError("rounds must be >= 1")
    sampler = as_sampler(noise, merged.patch_q.basis, rng)
    legs = [merged.seam_legs(s) for s in merged.seam_tiles]
    raw: list[list[int]] = [[] for _ in legs]
    sequence: list[int] = []

    def measure(i: int) -> None:
        out = hadamard_test(state, legs[i], sampler, rng,
                            site=("seam", merged.seam_tiles[i].seam_id, len(raw[i])),
                            ancilla=merged.ancilla)
        raw[i].append(out)
        sequence.append(out)

    for _ in range(rounds):
        for i in range(len(legs)):
            measure(i)
    values = []
    for i in range(len(legs)):
        while sum(raw[i]) == 0:  # tie: one extra round for this tile
            measure(i)
        values.append(1 if sum(raw[i]) > 0 else -1)
    m = sum(v < 0 for v in values) % 2
    return MergeOutcome(m=m, seam_outcomes=values, rounds=rounds, raw=raw, sequence=sequence), state


def seam_correction(merged: MergedLayout, syndrome: Sequence[int]) -> tuple[int, ...] | None:
    """Smallest set of seam tiles whose anticommutation pattern equals ``syndrome`` (bits over dropped tiles)."""
    target = np.array(syndrome, dtype=np.uint8) % 2
    k = len(merged.seam_tiles)
    for size in range(k + 1):
        for subset in itertools.combinations(range(k), size):
            pattern = (merged.anticommutation[list(subset)].sum(axis=0) % 2
                       if subset else np.zeros_like(target))
            if np.array_equal(pattern, target):
                return subset
    return None


def split(state: StateVector, merged: MergedLayout, noise=None, rng=None) -> tuple[SplitOutcome, StateVector]:
    """Measure every patch tile once and undo the dropped-tile syndrome with seam operators."""
    sampler = as_sampler(noise, merged.patch_q.basis, rng)
    outcomes = []
    for patch, t in merged.patch_tiles():
        outcomes.append(hadamard_test(state, patch.legs(t), sampler, rng,
                                      site=("split", patch.name, t.tile_id), ancilla=merged.ancilla))
    tiles = merged.patch_tiles()
    dropped_ids = {(p.name, t.tile_id) for p, t in merged.dropped}
    retained_ok = all(o == 1 for (p, t), o in zip(tiles, outcomes)
                      if (p.name, t.tile_id) not in dropped_ids)
    by_key = {(p.name, t.tile_id): o for (p, t), o in zip(tiles, outcomes)}
    syndrome = [int(by_key[(p.name, t.tile_id)] < 0) for p, t in merged.dropped]
    correction = seam_correction(merged, syndrome)
    if correction is None:
        return SplitOutcome(outcomes, (), False), state
    for i in correction:
        state.apply_legs(merged.seam_legs(merged.seam_tiles[i]))
    return SplitOutcome(outcomes, tuple(correction), retained_ok), state


# -- logical CNOT -----------------------------------------------------------------


@dataclass
class CnotRecord:
    a: int  # smooth merge Z_P Z_R
    b: int  # rough merge X_R X_Q
    c: int  # Z_L of the auxiliary patch
    outcomes: list[int] = field(default_factory=list)
    splits_consistent: bool = True

    @property
    def corrections(self) -> dict[str, int]:
        return {"X_Q": self.a ^ self.c, "Z_P": self.b, "X_R": self.c}


@dataclass(eq=False)
class CnotLayout:
    control: Patch
    aux: Patch
    target: Patch
    smooth: MergedLayout
    rough: MergedLayout
    ancilla: int


def build_cnot_layout(d: int = 2, basis_q: OperatorBasis | None = None,
                      basis_p: OperatorBasis = PAULI_BASIS,
                      basis_r: OperatorBasis = PAULI_BASIS) -> CnotLayout:
    layout = build_layout(d)
    n = d * d
    p = Patch("P", layout, basis_p, 0)
    r = Patch("R", layout, basis_r, n)
    q = Patch("Q", layout, PAULI_BASIS if basis_q is None else basis_q, 2 * n)
    anc = 3 * n
    return CnotLayout(p, r, q, merge_patches(p, r, "smooth", anc), merge_patches(r, q, "rough", anc), anc)


def cnot_input_state(lay: CnotLayout, control_state, target_state) -> StateVector:
    inv = 1 / math.sqrt(2)
    return _register(lay.ancilla, [(lay.control, lay.control.encode(*control_state)),
                                   (lay.aux, lay.aux.encode(inv, inv)),
                                   (lay.target, lay.target.encode(*target_state))])


def cnot_reference(lay: CnotLayout, control_state, target_state) -> StateVector:
    """``CNOT(P -> Q)`` applied to the logical inputs, with the auxiliary patch in ``|0>_L``."""
    aux0 = lay.aux.encode(1, 0)
    total = None
    for x in (0, 1):
        for y in (0, 1):
            coeff = complex(control_state[x]) * complex(target_state[y])
            if coeff == 0:
                continue
            part = _register(lay.ancilla, [
                (lay.control, lay.control.encode(1 - x, x)),
                (lay.aux, aux0),
                (lay.target, lay.target.encode(1 - (x ^ y), x ^ y)),
            ])
            total = coeff * part.amplitudes if total is None else total + coeff * part.amplitudes
    return StateVector(total, normalize=True)


def logical_cnot(control_state, target_state, rng, *, layout: CnotLayout | None = None,
                 noise=None, rounds: int | None = None) -> tuple[StateVector, CnotRecord]:
    """Merge/split CNOT from patch P onto patch Q through an auxiliary patch R in ``|+>_L``."""
    lay = build_cnot_layout() if layout is None else layout
    state = cnot_input_state(lay, control_state, target_state)
    outcomes: list[int] = []
    mo, state = merge_measure(state, lay.smooth, noise, rng, rounds=rounds)
    so1, state = split(state, lay.smooth, noise, rng)
    mo2, state = merge_measure(state, lay.rough, noise, rng, rounds=rounds)
    so2, state = split(state, lay.rough, noise, rng)
    sampler = as_sampler(noise, lay.aux.basis, rng)
    zr = hadamard_test(state, lay.aux.z_legs, sampler, rng, site=("readout", "R"), ancilla=lay.ancilla)
    outcomes += mo.sequence + so1.tile_outcomes + mo2.sequence + so2.tile_outcomes + [zr]
    rec = CnotRecord(a=mo.m, b=mo2.m, c=int(zr < 0), outcomes=outcomes,
                     splits_consistent=so1.consistent and so2.consistent)
    corr = rec.corrections
    if corr["X_Q"]:
        state.apply_legs(lay.target.x_legs)
    if corr["Z_P"]:
        state.apply_legs(lay.control.z_legs)
    if corr["X_R"]:
        state.apply_legs(lay.aux.x_legs)
    return state, rec


# -- branch enumeration ---------------------------------------------------------


class ScriptedRng:
    """Stand-in generator that forces measurement outcomes.

    Measurement ``i`` is forced to ``script[i]`` (0 beyond the script) unless one
    outcome has probability below ``eps``, in which case the likely outcome is forced.
    The branch probability of every measurement is recorded in ``probabilities``.
    Only valid with silent noise, where every draw belongs to a measurement.
    """

    _HIGH = float(np.nextafter(1.0, 0.0))

    def __init__(self, script: Sequence[int], eps: float = 1e-9):
        self.script = list(script)
        self.eps = eps
        self.calls = 0
        self.probabilities: list[float] = []

    def note_probability(self, p1: float) -> None:
        self.probabilities.append(p1)

    def random(self) -> float:
        p1 = self.probabilities[self.calls] if self.calls < len(self.probabilities) else 0.5
        if p1 < self.eps:
            bit = 0
        elif p1 > 1.0 - self.eps:
            bit = 1
        else:
            bit = self.script[self.calls] if self.calls < len(self.script) else 0
        self.calls += 1
        return 0.0 if bit else self._HIGH


def enumerate_branches(run: Callable[[ScriptedRng], tuple[object, list[int]]], eps: float = 1e-9):
    """Depth-first enumeration of every measurement branch whose conditional probability exceeds ``eps``.

    ``run(rng)`` must perform the whole procedure with ``rng`` and return
    ``(result, realized_bits)`` where ``realized_bits`` lists every measurement bit in
    draw order.  Each replay realizes one new branch; yields ``(bits, result)``.
    """
    stack: list[list[int]] = [[]]
    while stack:
        script = stack.pop()
        rng = ScriptedRng(script, eps)
        result, bits = run(rng)
        if len(bits) != rng.calls or len(rng.probabilities) != rng.calls:
            raise RuntimeError("procedure consumed draws that are not measurements")
        if bits[: len(script)] != script:
            raise RuntimeError("scripted branch was not realized")
        yield bits, result
        for j in range(len(bits) - 1, len(script) - 1, -1):
            if eps < rng.probabilities[j] < 1.0 - eps:
                stack.append(bits[:j] + [1 - bits[j]])


@dataclass
class BranchCheck:
    label: str
    fidelities: list[float]
    # measurement bits of each branch, in draw order
    branches_bits: list[list[int]] = field(default_factory=list)

    @property
    def branches(self) -> int:
        return len(self.fidelities)

    @property
    def worst_fidelity(self) -> float:
        return min(self.fidelities) if self.fidelities else 0.0

    @property
    def passed(self) -> bool:
        return self.branches > 0 and self.worst_fidelity >= 1.0 - SURGERY_TOL


def verify_cnot_branches(control_state, target_state, *, layout: CnotLayout | None = None,
                         label: str = "") -> BranchCheck:
    lay = build_cnot_layout() if layout is None else layout
    ref = cnot_reference(lay, control_state, target_state)

    def run(rng):
        state, rec = logical_cnot(control_state, target_state, rng, layout=lay)
        return fidelity(state, ref), [int(o < 0) for o in rec.outcomes]

    found = list(enumerate_branches(run))
    return BranchCheck(label, [f for _, f in found], [b for b, _ in found])


def verify_merge_branches(merged: MergedLayout, psi_p, psi_q, *, rounds: int | None = None,
                          with_split: bool = False) -> tuple[BranchCheck, dict[int, int]]:
    """Every seam-outcome branch of a noiseless merge against :func:`merged_state_reference`.

    Without ``with_split`` the reference is projected onto the seam outcomes; with it the
    reference is the plain ``(-1)^m`` joint-logical eigenstate of both code spaces.
    Returns the check and the number of feasible branches per ``m``.
    """
    start = joint_code_state(merged, psi_p, psi_q)

    def run(rng):
        state = start.copy()
        mo, state = merge_measure(state, merged, None, rng, rounds=rounds)
        bits = [int(o < 0) for o in mo.sequence]
        if with_split:
            so, state = split(state, merged, None, rng)
            bits += [int(o < 0) for o in so.tile_outcomes]
            ref = merged_state_reference(merged, psi_p, psi_q, mo.m)
        else:
            ref = merged_state_reference(merged, psi_p, psi_q, mo.m, seam_outcomes=mo.seam_outcomes)
        return (fidelity(state, ref), mo.m), bits

    per_m = {0: 0, 1: 0}
    check = BranchCheck(merged.boundary_kind, [])
    for bits, (f, m) in enumerate_branches(run):
        per_m[m] += 1
        check.fidelities.append(f)
        check.branches_bits.append(bits)
    return check, per_m
