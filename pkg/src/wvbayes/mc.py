"""Photon-by-photon Monte Carlo of the weak-measurement protocol.

Every photon lands in D or D' and carries one probe reading (position or
momentum, never both).  Randomness is counter based: photons are grouped in
fixed blocks of ``BLOCK_SIZE`` indices and block ``k`` of a run draws from a
Philox generator whose key comes from ``(seed, glass arm, mode, stream)`` and
whose counter starts at ``k``.  Shards own contiguous ranges of blocks, so the
photon records and the accumulated sums do not depend on the shard count.
Per-block sums are correctly rounded (``math.fsum``) and merged exactly as
fractions, which makes merging associative and commutative.
"""
from __future__ import annotations

import csv
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Iterator, Optional

import numpy as np

from .errors import BothPortsDark, ConfigError, InsufficientSamples, MismatchedRuns
from .mzi import ARMS, PORTS, GlassPlacement, MziState
from .probe import (
    MIN_PORT_PROBABILITY,
    GaussianProbe,
    PortWave,
    exact_port_probability,
    momentum_density,
    port_wave,
    position_density,
)

BLOCK_SIZE = 8192
MODES = ("position", "momentum")

#: rejection sampling switches to a tabulated inverse CDF below this acceptance rate
MIN_ACCEPTANCE = 0.05
GRID_POINTS = 4096

_ARM_CODE = {"B": 0, "C": 1}
_MODE_CODE = {"position": 0, "momentum": 1}


def check_mode(mode: str) -> str:
    mode = str(mode).lower()
    if mode in ("z", "pos"):
        mode = "position"
    elif mode in ("p", "mom"):
        mode = "momentum"
    if mode not in MODES:
        raise ConfigError(f"mode must be one of {MODES}, got {mode!r}")
    return mode


@dataclass(frozen=True)
class RunConfig:
    state: MziState
    glass: GlassPlacement
    probe: GaussianProbe = GaussianProbe()
    n_photons: int = 1_000_000
    mode: str = "position"
    seed: int = 0
    shards: int = 1
    stream: int = 0

    def __post_init__(self):
        if isinstance(self.n_photons, bool) or int(self.n_photons) != self.n_photons or self.n_photons < 1:
            raise ConfigError(f"n_photons must be a positive integer, got {self.n_photons!r}")
        if int(self.shards) != self.shards or self.shards < 1:
            raise ConfigError(f"shards must be a positive integer, got {self.shards!r}")
        if int(self.seed) != self.seed or not 0 <= self.seed < 2**64:
            raise ConfigError(f"seed must be an integer in [0, 2**64), got {self.seed!r}")
        object.__setattr__(self, "n_photons", int(self.n_photons))
        object.__setattr__(self, "shards", int(self.shards))
        object.__setattr__(self, "seed", int(self.seed))
        object.__setattr__(self, "mode", check_mode(self.mode))

    @property
    def n_blocks(self) -> int:
        return -(-self.n_photons // BLOCK_SIZE)

    def same_experiment(self, other: "RunConfig") -> bool:
        """Same physical setup (state, glass, probe), ignoring statistics knobs."""
        return (
            self.state == other.state
            and self.glass == other.glass
            and self.probe == other.probe
        )


@dataclass(frozen=True)
class PhotonRecord:
    index: int
    port: str
    observable: str
    value: float


# -- samplers ---------------------------------------------------------------


class _GridSampler:
    """Inverse CDF on a fixed grid; used when rejection would be too wasteful."""

    def __init__(self, density, lo: float, hi: float):
        x = np.linspace(lo, hi, GRID_POINTS)
        pdf = density(x)
        cdf = np.concatenate([[0.0], np.cumsum(0.5 * (pdf[1:] + pdf[:-1]) * np.diff(x))])
        self.x = x
        self.cdf = cdf / cdf[-1]

    def draw(self, rng: np.random.Generator, k: int) -> np.ndarray:
        return np.interp(rng.random(k), self.cdf, self.x)


class _PositionRejection:
    """Envelope: mixture of the two Gaussians making up phi, using |a+b|^2 <= 2(|a|^2+|b|^2)."""

    def __init__(self, wave: PortWave):
        self.wave = wave
        self.density = position_density(wave)
        self.a2 = abs(wave.c_thru) ** 2
        self.b2 = abs(wave.c_other) ** 2
        self.acceptance = self.density.norm2 / (2 * (self.a2 + self.b2))

    def _propose(self, rng, m):
        w = self.wave
        shifted = rng.random(m) < self.a2 / (self.a2 + self.b2)
        z = rng.normal(0.0, w.probe.sigma, m) + np.where(shifted, w.g, 0.0)
        f = w.probe.f
        env = 2 * (self.a2 * f(z - w.g) ** 2 + self.b2 * f(z) ** 2)
        target = np.abs(w.amplitude(z)) ** 2
        keep = rng.random(m) * env < target
        return z[keep]

    def draw(self, rng, k):
        return _rejection_loop(self._propose, self.acceptance, rng, k)


class _MomentumRejection:
    """Envelope: the bare probe momentum Gaussian times (|c_thru| + |c_other|)^2."""

    def __init__(self, wave: PortWave):
        self.wave = wave
        self.density = momentum_density(wave)
        self.bound = (abs(wave.c_thru) + abs(wave.c_other)) ** 2
        self.acceptance = self.density.norm2 / self.bound

    def _propose(self, rng, m):
        w = self.wave
        p = rng.normal(0.0, w.probe.sigma_p, m)
        factor = np.abs(w.c_thru * np.exp(-1j * p * w.g) + w.c_other) ** 2
        keep = rng.random(m) * self.bound < factor
        return p[keep]

    def draw(self, rng, k):
        return _rejection_loop(self._propose, self.acceptance, rng, k)


def _rejection_loop(propose, acceptance, rng, k):
    out = []
    have = 0
    while have < k:
        need = k - have
        got = propose(rng, int(need / acceptance * 1.1) + 16)
        out.append(got)
        have += got.size
    return np.concatenate(out)[:k] if out else np.empty(0)


def make_sampler(wave: PortWave, mode: str):
    mode = check_mode(mode)
    if mode == "position":
        s = _PositionRejection(wave)
    else:
        s = _MomentumRejection(wave)
    if s.acceptance < MIN_ACCEPTANCE:
        return _GridSampler(s.density, *s.density.support())
    return s


@dataclass
class _RunPlan:
    """Everything needed to produce one block, computed once per run."""

    config: RunConfig
    p_d: float
    samplers: dict
    key: np.ndarray

    @classmethod
    def build(cls, config: RunConfig) -> "_RunPlan":
        waves = {port: port_wave(config.state, config.glass, config.probe, port) for port in PORTS}
        probs = {port: exact_port_probability(w) for port, w in waves.items()}
        if all(p <= MIN_PORT_PROBABILITY for p in probs.values()):
            raise BothPortsDark("neither output port can receive photons")
        samplers = {
            port: make_sampler(w, config.mode) for port, w in waves.items() if probs[port] > MIN_PORT_PROBABILITY
        }
        # exact probabilities already sum to 1; renormalize only against rounding
        p_d = probs["D"] / (probs["D"] + probs["D'"])
        return cls(config, p_d, samplers, stream_key(config))

    def block(self, k: int):
        """Return (indices, port codes 0=D 1=D', values) for block ``k``."""
        cfg = self.config
        start = k * BLOCK_SIZE
        stop = min(start + BLOCK_SIZE, cfg.n_photons)
        rng = np.random.Generator(np.random.Philox(key=self.key, counter=[0, 0, 0, k]))
        m = stop - start
        codes = (rng.random(m) >= self.p_d).astype(np.int8)
        values = np.empty(m)
        for code, port in enumerate(PORTS):
            sel = codes == code
            n_sel = int(sel.sum())
            if n_sel:
                if port not in self.samplers:
                    raise BothPortsDark(f"photon sent to dark port {port}")
                values[sel] = self.samplers[port].draw(rng, n_sel)
        return np.arange(start, stop), codes, values


def stream_key(config: RunConfig) -> np.ndarray:
    ss = np.random.SeedSequence(
        config.seed, spawn_key=(_ARM_CODE[config.glass.arm], _MODE_CODE[config.mode], config.stream)
    )
    return ss.generate_state(2, np.uint64)


# -- accumulators -------------------------------------------------------------

_ZERO = Fraction(0)


@dataclass
class PortStats:
    n: int = 0
    z_sum_exact: Fraction = _ZERO
    z_sumsq_exact: Fraction = _ZERO
    p_sum_exact: Fraction = _ZERO
    p_sumsq_exact: Fraction = _ZERO

    @property
    def z_sum(self) -> float:
        return float(self.z_sum_exact)

    @property
    def z_sumsq(self) -> float:
        return float(self.z_sumsq_exact)

    @property
    def p_sum(self) -> float:
        return float(self.p_sum_exact)

    @property
    def p_sumsq(self) -> float:
        return float(self.p_sumsq_exact)

    def merged(self, other: "PortStats") -> "PortStats":
        return PortStats(
            self.n + other.n,
            self.z_sum_exact + other.z_sum_exact,
            self.z_sumsq_exact + other.z_sumsq_exact,
            self.p_sum_exact + other.p_sum_exact,
            self.p_sumsq_exact + other.p_sumsq_exact,
        )

    def sums(self, observable: str) -> tuple[float, float]:
        """Rounded (sum, sum of squares) of the run's observable.

        Estimators only ever see these floats, so a summary reloaded from JSON
        reproduces them exactly.
        """
        if observable == "position":
            return self.z_sum, self.z_sumsq
        return self.p_sum, self.p_sumsq

    @classmethod
    def from_floats(cls, n, z_sum=0.0, z_sumsq=0.0, p_sum=0.0, p_sumsq=0.0) -> "PortStats":
        return cls(int(n), Fraction(z_sum), Fraction(z_sumsq), Fraction(p_sum), Fraction(p_sumsq))


@dataclass
class ShiftAccumulator:
    """Per-port counts and sums for one run (one glass arm, one probe observable)."""

    config: RunConfig
    ports: dict = field(default_factory=lambda: {p: PortStats() for p in PORTS})

    @property
    def glass_arm(self) -> str:
        return self.config.glass.arm

    @property
    def mode(self) -> str:
        return self.config.mode

    @property
    def g(self) -> float:
        return self.config.glass.g

    @property
    def n_total(self) -> int:
        return sum(s.n for s in self.ports.values())

    def __getitem__(self, port: str) -> PortStats:
        from .mzi import check_port

        return self.ports[check_port(port)]

    def add_block(self, codes: np.ndarray, values: np.ndarray) -> None:
        for code, port in enumerate(PORTS):
            v = values[codes == code]
            if v.size == 0:
                continue
            s = math.fsum(v.tolist())
            ss = math.fsum((v * v).tolist())
            if self.mode == "position":
                part = PortStats(int(v.size), Fraction(s), Fraction(ss))
            else:
                part = PortStats(int(v.size), _ZERO, _ZERO, Fraction(s), Fraction(ss))
            self.ports[port] = self.ports[port].merged(part)

    def merge(self, other: "ShiftAccumulator") -> "ShiftAccumulator":
        if not (self.config.same_experiment(other.config) and self.mode == other.mode):
            raise MismatchedRuns("cannot merge accumulators from different experiments")
        return ShiftAccumulator(self.config, {p: self.ports[p].merged(other.ports[p]) for p in PORTS})

    def same_totals(self, other: "ShiftAccumulator") -> bool:
        return self.ports == other.ports

    @classmethod
    def from_dict(cls, config: RunConfig, ports: dict) -> "ShiftAccumulator":
        from .mzi import check_port

        stats = {p: PortStats() for p in PORTS}
        for port, d in ports.items():
            stats[check_port(port)] = PortStats.from_floats(
                d["n"], d["z_sum"], d["z_sumsq"], d["p_sum"], d["p_sumsq"]
            )
        return cls(config, stats)

    def to_dict(self) -> dict:
        out = {}
        se = standard_errors(self, strict=False)
        for port in PORTS:
            s = self.ports[port]
            out[port] = {
                "n": s.n,
                "z_sum": s.z_sum,
                "z_sumsq": s.z_sumsq,
                "p_sum": s.p_sum,
                "p_sumsq": s.p_sumsq,
                "se_z": _json_float(se[port][0]),
                "se_p": _json_float(se[port][1]),
            }
        return out


def _json_float(x: float):
    return None if x is None or not math.isfinite(x) else x


def fold_records(config: RunConfig, records: Iterable[PhotonRecord]) -> ShiftAccumulator:
    """Rebuild an accumulator from a record stream (records must follow index order)."""
    acc = ShiftAccumulator(config)
    current, codes, values = None, [], []
    for r in records:
        k = r.index // BLOCK_SIZE
        if current is not None and k != current:
            acc.add_block(np.array(codes, dtype=np.int8), np.array(values))
            codes, values = [], []
        current = k
        codes.append(PORTS.index(r.port))
        values.append(r.value)
    if codes:
        acc.add_block(np.array(codes, dtype=np.int8), np.array(values))
    return acc


def standard_errors(acc: ShiftAccumulator, strict: bool = True) -> dict:
    """Per-port ``(se_z, se_p)``: sample standard deviation over sqrt(n).

    Only the run's own observable has data; the other entry is NaN.
    """
    out = {}
    for port in PORTS:
        s = acc.ports[port]
        if s.n < 2:
            if strict:
                raise InsufficientSamples(f"port {port} has {s.n} photon(s); need at least 2")
            out[port] = (math.nan, math.nan)
            continue
        total, sq = s.sums(acc.mode)
        var = (sq - total * total / s.n) / (s.n - 1)
        se = math.sqrt(max(var, 0.0) / s.n)
        out[port] = (se, math.nan) if acc.mode == "position" else (math.nan, se)
    return out


# -- running ------------------------------------------------------------------


def shard_blocks(n_blocks: int, shards: int) -> list[range]:
    per = n_blocks // shards
    ranges = []
    for i in range(shards):
        lo = i * per
        hi = n_blocks if i == shards - 1 else lo + per
        ranges.append(range(lo, hi))
    return ranges


def _run_shard(config: RunConfig, blocks: range) -> ShiftAccumulator:
    plan = _RunPlan.build(config)
    acc = ShiftAccumulator(config)
    for k in blocks:
        _, codes, values = plan.block(k)
        acc.add_block(codes, values)
    return acc


def iter_records(config: RunConfig, blocks: Optional[Iterable[int]] = None) -> Iterator[PhotonRecord]:
    plan = _RunPlan.build(config)
    for k in blocks if blocks is not None else range(config.n_blocks):
        idx, codes, values = plan.block(k)
        for i, c, v in zip(idx.tolist(), codes.tolist(), values.tolist()):
            yield PhotonRecord(i, PORTS[c], config.mode, v)


def sample_photon(config: RunConfig, index: int) -> PhotonRecord:
    """The record of photon ``index``; the counter fully determines it."""
    if not 0 <= index < config.n_photons:
        raise ConfigError(f"photon index {index} outside [0, {config.n_photons})")
    plan = _RunPlan.build(config)
    idx, codes, values = plan.block(index // BLOCK_SIZE)
    j = index - int(idx[0])
    return PhotonRecord(index, PORTS[codes[j]], config.mode, float(values[j]))


RECORD_HEADER = ("index", "port", "observable", "value")


def write_records(config: RunConfig, path, blocks: Optional[Iterable[int]] = None) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(RECORD_HEADER)
        for r in iter_records(config, blocks):
            w.writerow((r.index, r.port, r.observable, repr(r.value)))


def read_records(path) -> Iterator[PhotonRecord]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != RECORD_HEADER:
            raise ConfigError(f"{path}: expected header {','.join(RECORD_HEADER)}")
        for row in reader:
            yield PhotonRecord(int(row["index"]), row["port"], row["observable"], float(row["value"]))


def run_experiment(config: RunConfig, records_path=None, workers: int = 1) -> ShiftAccumulator:
    """Run all shards and merge them in shard order.

    With ``records_path`` the per-photon CSV is written as well, ordered by index.
    """
    ranges = shard_blocks(config.n_blocks, config.shards)
    if workers > 1 and config.shards > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_run_shard, [config] * len(ranges), ranges))
    else:
        parts = [_run_shard(config, r) for r in ranges]
    acc = parts[0]
    for part in parts[1:]:
        acc = acc.merge(part)
    if records_path is not None:
        write_records(config, Path(records_path))
    return acc


def paired_runs(
    state: MziState,
    probe: GaussianProbe,
    g: float,
    n: int,
    seed: int,
    mode: str,
    shards: int = 1,
    workers: int = 1,
) -> tuple[ShiftAccumulator, ShiftAccumulator]:
    """Glass in B, then glass in C; independent streams, equal photon budgets."""
    accs = []
    for arm in ARMS:
        cfg = RunConfig(state, GlassPlacement(arm, g), probe, n, mode, seed, shards)
        accs.append(run_experiment(cfg, workers=workers))
    return accs[0], accs[1]


def run_protocol(state, probe, g, n, seed, shards=1, workers=1) -> dict:
    """All four runs: ``{(arm, mode): ShiftAccumulator}``."""
    out = {}
    for mode in MODES:
        acc_b, acc_c = paired_runs(state, probe, g, n, seed, mode, shards, workers)
        out["B", mode] = acc_b
        out["C", mode] = acc_c
    return out


def with_seed(config: RunConfig, seed: int) -> RunConfig:
    return replace(config, seed=seed)
