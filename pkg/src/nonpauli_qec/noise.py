"""Stochastic single-qubit error channels realized by trajectory sampling.

Each noise site consumes exactly one uniform draw ``u``.  The branch is chosen by
cumulative thresholds in the fixed order ``(A, B, C)``, which is ``(X, Z, Y)`` in
Pauli mode, so a Pauli channel and a non-Pauli channel over the ``gamma = 0``
basis pick the same branch from the same draw.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Hashable, Mapping

import numpy as np

from .algebra import OperatorBasis
from .engine import StateVector, X, Y, Z

BRANCHES = ("A", "B", "C")
PAULI_LABEL = {"A": "X", "B": "Z", "C": "Y"}
MODES = ("pauli", "nonpauli")


@dataclass(frozen=True)
class NoiseChannel:
    """Error probabilities: ``p_s`` split into ``split`` components (A/X, B/Z, C/Y order)."""

    p_s: float = 0.0
    split: tuple[float, float, float] | None = None
    basis_mode: str = "nonpauli"
    p_t: float = 0.0
    p_r: float = 0.0

    def __post_init__(self):
        if self.basis_mode not in MODES:
            raise ValueError(f"basis_mode must be one of {MODES}")
        for name in ("p_s", "p_t", "p_r"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name}={v} outside [0, 1]")
        if self.split is None:
            object.__setattr__(self, "split", (self.p_s / 3,) * 3)
        else:
            split = tuple(float(x) for x in self.split)
            if len(split) != 3 or min(split) < 0:
                raise ValueError("split must be three nonnegative probabilities")
            if abs(sum(split) - self.p_s) > 1e-12:
                raise ValueError(f"split {split} does not sum to p_s={self.p_s}")
            object.__setattr__(self, "split", split)

    @classmethod
    def from_ratio(cls, p_s: float, ratio: tuple[float, float, float], **kw) -> NoiseChannel:
        """Split ``p_s`` proportionally to ``ratio`` (e.g. the config form ``a:b:c``)."""
        tot = float(sum(ratio))
        if tot <= 0 or min(ratio) < 0:
            raise ValueError(f"bad split ratio {ratio}")
        split = tuple(p_s * r / tot for r in ratio)
        # absorb rounding so the components sum to p_s exactly
        split = (split[0], split[1], p_s - split[0] - split[1])
        return cls(p_s=p_s, split=split, **kw)

    def error_ops(self, basis: OperatorBasis) -> dict[str, np.ndarray]:
        if self.basis_mode == "pauli":
            return {"A": X, "B": Z, "C": Y}
        return {"A": basis.s_a, "B": basis.s_b, "C": basis.s_c}

    def branch_for(self, u: float) -> str | None:
        pa, pb, pc = self.split
        if u < pa:
            return "A"
        if u < pa + pb:
            return "B"
        if u < pa + pb + pc:
            return "C"
        return None


def apply_after_gate(state: StateVector, q: int, channel: NoiseChannel, basis: OperatorBasis, rng):
    """Sample the channel once on qubit ``q``; returns ``(state, branch)`` with branch None for identity."""
    branch = channel.branch_for(rng.random())
    if branch is not None:
        state.apply_single(channel.error_ops(basis)[branch], q)
    return state, branch


@dataclass
class NoiseSampler:
    """Trial-owned noise source with optional forced errors.

    ``inject`` maps a site label to a branch ("A"/"B"/"C"); at those sites the branch is
    applied regardless of the draw (the draw is still consumed).  Every fired branch is
    logged in ``fired`` as ``(site, branch)``.
    """

    channel: NoiseChannel
    basis: OperatorBasis
    rng: object
    inject: Mapping[Hashable, str] | None = None
    fired: list = field(default_factory=list)

    def __post_init__(self):
        self._ops = self.channel.error_ops(self.basis)

    def after_gate(self, state: StateVector, q: int, site: Hashable) -> None:
        branch = self.channel.branch_for(self.rng.random())
        if self.inject is not None and site in self.inject:
            branch = self.inject[site]
        if branch is not None:
            state.apply_single(self._ops[branch], q)
            self.fired.append((site, branch))

    def after_two_qubit(self, state: StateVector, target: int, site: Hashable) -> None:
        # p_t hook: single-qubit channel on the target; draws only when enabled
        if self.channel.p_t > 0.0:
            u = self.rng.random()
            if u < self.channel.p_t:
                branch = BRANCHES[min(2, int(3 * u / self.channel.p_t))]
                state.apply_single(self._ops[branch], target)
                self.fired.append((site, branch))

    def after_reset(self, state: StateVector, q: int, site: Hashable) -> None:
        # p_r hook: reset leaves the qubit in |1>; draws only when enabled
        if self.channel.p_r > 0.0 and self.rng.random() < self.channel.p_r:
            state.apply_single(X, q)
            self.fired.append((site, "reset"))


class SilentNoise:
    """Noiseless stand-in that consumes no random draws."""

    fired: list = []

    def after_gate(self, state, q, site) -> None:
        pass

    def after_two_qubit(self, state, target, site) -> None:
        pass

    def after_reset(self, state, q, site) -> None:
        pass


SILENT = SilentNoise()


def as_sampler(noise, basis: OperatorBasis, rng):
    """Accept ``None`` (silent), a :class:`NoiseChannel`, or an existing sampler."""
    if noise is None:
        return SILENT
    if isinstance(noise, SilentNoise):
        return noise
    if isinstance(noise, NoiseSampler):
        return noise
    return NoiseSampler(noise, basis, rng)
