"""Monte Carlo sweeps: config parsing, seeded parallel trials, aggregation, CSV output.

Trial ``t`` of point ``(protocol, scheme, distance)`` draws from
``Philox(SeedSequence(seed, spawn_key=(point_index, t)))`` where
``point_index = 100*protocol + 10*scheme_id + distance`` (scheme_id 0 for nonpauli,
1 for pauli).  The error rate is not part of the key, so every ``p_s`` of a point
reuses the same streams (common random numbers), which makes the curves smoother and
keeps results independent of how the work is split among processes.
"""

from __future__ import annotations

import csv
import io
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields

import numpy as np
from scipy import optimize, stats

from .algebra import MAGIC_A
from .engine import trial_rng
from .noise import NoiseChannel
from .protocols import DEFAULT_RESTART_LIMIT, DEFAULT_TOLERANCE, SCHEMES, ProtocolConfig, Status, run_trial

log = logging.getLogger(__name__)

DEFAULT_SHOTS = {2: 200_000, 3: 50_000, 4: 10_000}
CSV_HEADER = ("protocol,scheme,distance,p_s,shots,accepted,failures,discards,"
              "restarts_total,exhausted,ler_total,ler_accepted,acceptance_rate,wilson95,seed")
Z95 = float(stats.norm.ppf(0.975))


class ConfigError(ValueError):
    """Bad sweep configuration (maps to exit status 2)."""


@dataclass
class SweepConfig:
    protocols: list[int] = field(default_factory=lambda: [1])
    schemes: list[str] = field(default_factory=lambda: ["nonpauli"])
    distances: list[int] = field(default_factory=lambda: [3])
    p_s_values: list[float] = field(default_factory=lambda: [1e-3])
    target: tuple[complex, complex] = MAGIC_A
    tolerance: float = DEFAULT_TOLERANCE
    restart_limit: int = DEFAULT_RESTART_LIMIT
    shots: int | None = None  # None: per-distance default
    seed: int = 1
    workers: int = 1
    output: str | None = None
    split: tuple[float, float, float] | None = None  # ratio, None for symmetric
    p_t: float = 0.0
    p_r: float = 0.0

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if not self.p_s_values:
            raise ConfigError("noise.p_s needs at least one value")
        for p in self.p_s_values:
            if not 0.0 <= p <= 0.5:
                raise ConfigError(f"noise.p_s value {p} outside [0, 0.5]")
        if self.shots is not None and self.shots < 1:
            raise ConfigError("shots must be >= 1")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        if not 0 <= self.seed < 2 ** 64:
            raise ConfigError("seed must be a 64-bit unsigned integer")
        for s in self.schemes:
            if s not in SCHEMES:
                raise ConfigError(f"unknown scheme {s!r}")
        for p in self.protocols:
            if p not in (1, 2):
                raise ConfigError(f"unknown protocol {p}")
        for d in self.distances:
            if d not in (2, 3, 4):
                raise ConfigError(f"distance {d} outside 2..4")

    def shots_for(self, distance: int) -> int:
        return self.shots if self.shots is not None else DEFAULT_SHOTS[distance]

    def noise(self, p_s: float) -> NoiseChannel:
        if self.split is None:
            return NoiseChannel(p_s=p_s, p_t=self.p_t, p_r=self.p_r)
        return NoiseChannel.from_ratio(p_s, self.split, p_t=self.p_t, p_r=self.p_r)

    def protocol_config(self, protocol: int, scheme: str, distance: int, p_s: float) -> ProtocolConfig:
        return ProtocolConfig(protocol=protocol, scheme=scheme, distance=distance, target=self.target,
                              noise=self.noise(p_s), tolerance=self.tolerance,
                              restart_limit=self.restart_limit)


# -- config files ---------------------------------------------------------------


def _list(value: str, conv, key: str) -> list:
    try:
        out = [conv(v.strip()) for v in value.split(",") if v.strip()]
    except ValueError as exc:
        raise ConfigError(f"bad value for {key}: {value!r}") from exc
    if not out:
        raise ConfigError(f"empty value for {key}")
    return out


def _scalar(value: str, conv, key: str):
    try:
        return conv(value.strip())
    except ValueError as exc:
        raise ConfigError(f"bad value for {key}: {value!r}") from exc


def parse_target(value: str) -> tuple[complex, complex]:
    """``A`` or ``coeff:re,im,re,im`` (normalized on read)."""
    value = value.strip()
    if value == "A":
        return MAGIC_A
    if value.startswith("coeff:"):
        parts = _list(value[len("coeff:"):], float, "target")
        if len(parts) != 4:
            raise ConfigError("target coeff needs four numbers re,im,re,im")
        a, b = complex(parts[0], parts[1]), complex(parts[2], parts[3])
        nrm = math.hypot(abs(a), abs(b))
        if nrm == 0:
            raise ConfigError("target coefficients are both zero")
        return a / nrm, b / nrm
    raise ConfigError(f"target must be 'A' or 'coeff:re,im,re,im', got {value!r}")


def _parse_split(value: str):
    value = value.strip()
    if value == "symmetric":
        return None
    ratio = _list(value.replace(":", ","), float, "noise.split")
    if len(ratio) != 3 or min(ratio) < 0 or sum(ratio) <= 0:
        raise ConfigError(f"noise.split must be 'symmetric' or a:b:c, got {value!r}")
    return tuple(ratio)


def _parse_shots(value: str):
    return None if value.strip() == "auto" else _scalar(value, int, "shots")


_KEYS = {
    "protocol": ("protocols", lambda v: _list(v, int, "protocol")),
    "scheme": ("schemes", lambda v: _list(v, str, "scheme")),
    "distance": ("distances", lambda v: _list(v, int, "distance")),
    "target": ("target", parse_target),
    "tolerance": ("tolerance", lambda v: _scalar(v, float, "tolerance")),
    "restart_limit": ("restart_limit", lambda v: _scalar(v, int, "restart_limit")),
    "shots": ("shots", _parse_shots),
    "seed": ("seed", lambda v: _scalar(v, int, "seed")),
    "workers": ("workers", lambda v: _scalar(v, int, "workers")),
    "output": ("output", str.strip),
    "noise.p_s": ("p_s_values", lambda v: _list(v, float, "noise.p_s")),
    "noise.split": ("split", _parse_split),
    "noise.p_t": ("p_t", lambda v: _scalar(v, float, "noise.p_t")),
    "noise.p_r": ("p_r", lambda v: _scalar(v, float, "noise.p_r")),
}


def parse_config_text(text: str) -> dict:
    """``key = value`` lines; ``#`` starts a comment.  Unknown keys raise :class:`ConfigError`."""
    values = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw.strip()!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in _KEYS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        attr, conv = _KEYS[key]
        values[attr] = conv(value)
    return values


def load_config(path: str, **overrides) -> SweepConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from exc
    values = parse_config_text(text)
    values.update({k: v for k, v in overrides.items() if v is not None})
    try:
        return SweepConfig(**values)
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from exc


# -- trials ---------------------------------------------------------------------


def point_index(protocol: int, scheme: str, distance: int) -> int:
    return 100 * protocol + 10 * SCHEMES.index(scheme) + distance


@dataclass
class Counts:
    shots: int = 0
    accepted: int = 0
    failures: int = 0
    discards: int = 0
    restarts_total: int = 0
    exhausted: int = 0

    def __add__(self, other: Counts) -> Counts:
        return Counts(*(getattr(self, f.name) + getattr(other, f.name) for f in fields(Counts)))


def run_chunk(config: ProtocolConfig, seed: int, pidx: int, start: int, stop: int) -> Counts:
    c = Counts()
    for t in range(start, stop):
        r = run_trial(config, trial_rng(seed, pidx, t))
        c.shots += 1
        c.restarts_total += r.restarts
        if r.status is Status.EXHAUSTED:
            c.exhausted += 1
        elif r.status is Status.DISCARDED:
            c.discards += 1
        else:
            c.accepted += 1
            c.failures += r.status is Status.ACCEPTED_FAILED
    return c


def _chunks(shots: int, workers: int) -> list[tuple[int, int]]:
    n = max(1, min(shots, workers * 8))
    edges = np.linspace(0, shots, n + 1).astype(int)
    return [(int(a), int(b)) for a, b in zip(edges[:-1], edges[1:]) if b > a]


def run_point(config: ProtocolConfig, shots: int, seed: int, pidx: int, pool=None, workers: int = 1) -> Counts:
    if pool is None:
        return run_chunk(config, seed, pidx, 0, shots)
    spans = _chunks(shots, workers)
    futures = [pool.submit(run_chunk, config, seed, pidx, a, b) for a, b in spans]
    total = Counts()
    for fut in futures:
        total = total + fut.result()
    return total


# -- statistics -------------------------------------------------------------------


def wilson_halfwidth(k: int, n: int, z: float = Z95) -> float:
    if n == 0:
        return 0.0
    p = k / n
    return z * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / (1 + z * z / n)


def wilson_interval(k: int, n: int, z: float = Z95) -> tuple[float, float]:
    if n == 0:
        return 0.0, 1.0
    p = k / n
    centre = (p + z * z / (2 * n)) / (1 + z * z / n)
    h = wilson_halfwidth(k, n, z)
    # the endpoints are exact at k=0 and k=n; avoid cancellation residue
    lo = 0.0 if k == 0 else max(0.0, centre - h)
    hi = 1.0 if k == n else min(1.0, centre + h)
    return lo, hi


@dataclass
class SweepRecord:
    protocol: int
    scheme: str
    distance: int
    p_s: float
    shots: int
    accepted: int
    failures: int
    discards: int
    restarts_total: int
    exhausted: int
    seed: int

    def __post_init__(self):
        if not 0 <= self.failures <= self.accepted <= self.shots:
            raise ValueError("counts violate failures <= accepted <= shots")

    @property
    def ler_total(self) -> float:
        return self.failures / self.shots

    @property
    def ler_accepted(self) -> float:
        return self.failures / self.accepted if self.accepted else 0.0

    @property
    def acceptance_rate(self) -> float:
        return self.accepted / self.shots

    @property
    def wilson95(self) -> float:
        return wilson_halfwidth(self.failures, self.shots)

    @property
    def interval(self) -> tuple[float, float]:
        return wilson_interval(self.failures, self.shots)

    def sort_key(self):
        return (self.protocol, self.scheme, self.distance, self.p_s)

    def row(self) -> list[str]:
        g = lambda x: format(x, ".10g")  # noqa: E731
        return [str(self.protocol), self.scheme, str(self.distance), g(self.p_s), str(self.shots),
                str(self.accepted), str(self.failures), str(self.discards), str(self.restarts_total),
                str(self.exhausted), g(self.ler_total), g(self.ler_accepted), g(self.acceptance_rate),
                g(self.wilson95), str(self.seed)]


def run_sweep(config: SweepConfig) -> list[SweepRecord]:
    points = sorted((p, s, d) for p in config.protocols for s in config.schemes for d in config.distances)
    records = []
    pool = ProcessPoolExecutor(max_workers=config.workers) if config.workers > 1 else None
    try:
        for protocol, scheme, distance in points:
            pidx = point_index(protocol, scheme, distance)
            shots = config.shots_for(distance)
            for p_s in sorted(config.p_s_values):
                pc = config.protocol_config(protocol, scheme, distance, p_s)
                c = run_point(pc, shots, config.seed, pidx, pool, config.workers)
                records.append(SweepRecord(protocol, scheme, distance, p_s, c.shots, c.accepted,
                                           c.failures, c.discards, c.restarts_total, c.exhausted,
                                           config.seed))
                log.info("protocol %d %s d=%d p_s=%g: %d/%d failed", protocol, scheme, distance,
                         p_s, c.failures, c.shots)
    finally:
        if pool is not None:
            pool.shutdown()
    return records


def format_csv(records) -> str:
    if not records:
        raise ValueError("no records to write")
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    buf.write(CSV_HEADER + "\n")
    for r in sorted(records, key=SweepRecord.sort_key):
        writer.writerow(r.row())
    return buf.getvalue()


def emit_csv(records, path: str) -> None:
    text = format_csv(records)
    try:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror}") from exc


def read_csv(path: str) -> list[dict]:
    with open(path, encoding="utf-8", newline="") as fh:
        return list(csv.DictReader(fh))


# -- scaling fits -------------------------------------------------------------------


@dataclass
class PowerLawFit:
    slope: float
    log_prefactor: float
    ols_slope: float | None
    points: int


def fit_power_law(p_values, failures, shots) -> PowerLawFit:
    """Binomial maximum-likelihood fit of ``ler = A p^k``.

    Unlike least squares on ``log(ler)`` this uses every point, including ones with
    zero failures.  ``ols_slope`` is the plain log-log slope over the nonzero points.
    """
    p = np.asarray(p_values, dtype=float)
    k = np.asarray(failures, dtype=float)
    n = np.asarray(shots, dtype=float)
    if len(p) < 2:
        raise ValueError("need at least two points")
    x = np.log(p)
    xm = x.mean()

    def nll(theta):
        loga, slope = theta
        lam = np.clip(np.exp(loga + slope * (x - xm)), 1e-300, 1 - 1e-12)
        return -float(np.sum(k * np.log(lam) + (n - k) * np.log1p(-lam)))

    nz = k > 0
    ols = None
    if nz.sum() >= 2:
        ols = float(np.polyfit(x[nz], np.log(k[nz] / n[nz]), 1)[0])
    rate = max(k.sum(), 0.5) / n.sum()
    start = np.array([math.log(rate), ols if ols is not None else 1.0])
    res = optimize.minimize(nll, start, method="Nelder-Mead",
                            options={"xatol": 1e-10, "fatol": 1e-12, "maxiter": 20000})
    loga, slope = res.x
    return PowerLawFit(slope=float(slope), log_prefactor=float(loga - slope * xm), ols_slope=ols,
                       points=len(p))


def default_workers() -> int:
    return max(1, os.cpu_count() or 1)
