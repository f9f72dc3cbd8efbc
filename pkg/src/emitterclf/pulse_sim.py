"""Synthetic pulse-stream generator with controllable class structure.

Each emitter class is described by one pattern per attribute:

* PRI / PW patterns: ``constant(v)``, ``stagger(v1..vK)`` (cycled in order),
  ``jitter(center, dev)`` (uniform on center*(1 +/- dev)).
* RF patterns: ``constant(v)`` or ``hop(dwell, v1..vK)`` (each value held
  for `dwell` consecutive pulses, cycled).

Measurement noise is additive Gaussian per attribute value. Sequence
generation derives a child RNG from (seed, class_id, sequence_index), so
datasets are identical no matter how generation work is ordered or
distributed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data_model import Dataset, PulseSequence, MIN_SEQ_LEN, MAX_SEQ_LEN
from .seeding import derive_rng

__all__ = [
    "ConstantPattern",
    "StaggerPattern",
    "JitterPattern",
    "HopPattern",
    "EmitterSpec",
    "SimConfig",
    "generate_sequence",
    "generate_dataset",
    "add_noise",
    "parse_pattern",
    "format_pattern",
    "VALUE_FLOOR",
]

# Clamp floor for noisy attribute values, in file units.
VALUE_FLOOR = 1e-9


@dataclass(frozen=True)
class ConstantPattern:
    value: float

    def __post_init__(self):
        if not self.value > 0.0:
            raise ValueError("constant pattern value must be > 0")

    def value_at(self, t: int, rng) -> float:
        return self.value

    @property
    def mean(self) -> float:
        return self.value

    @property
    def lo(self) -> float:
        return self.value

    @property
    def hi(self) -> float:
        return self.value


@dataclass(frozen=True)
class StaggerPattern:
    """Deterministic cycle through a fixed list of values."""

    values: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))
        if not self.values:
            raise ValueError("stagger pattern needs at least one value")
        if any(v <= 0.0 for v in self.values):
            raise ValueError("stagger pattern values must be > 0")

    def value_at(self, t: int, rng) -> float:
        return self.values[t % len(self.values)]

    @property
    def mean(self) -> float:
        return float(np.mean(self.values))

    @property
    def lo(self) -> float:
        return min(self.values)

    @property
    def hi(self) -> float:
        return max(self.values)


@dataclass(frozen=True)
class JitterPattern:
    """Uniform random deviation around a center: center * (1 +/- deviation)."""

    center: float
    deviation: float

    def __post_init__(self):
        if not self.center > 0.0:
            raise ValueError("jitter center must be > 0")
        if not 0.0 <= self.deviation <= 0.5:
            raise ValueError("jitter deviation must lie in [0, 0.5]")

    def value_at(self, t: int, rng) -> float:
        return self.center * (1.0 + self.deviation * rng.uniform(-1.0, 1.0))

    @property
    def mean(self) -> float:
        return self.center

    @property
    def lo(self) -> float:
        return self.center * (1.0 - self.deviation)

    @property
    def hi(self) -> float:
        return self.center * (1.0 + self.deviation)


@dataclass(frozen=True)
class HopPattern:
    """Cycle through values, holding each for `dwell` consecutive pulses."""

    values: tuple[float, ...]
    dwell: int

    def __post_init__(self):
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))
        if not self.values:
            raise ValueError("hop pattern needs at least one value")
        if any(v <= 0.0 for v in self.values):
            raise ValueError("hop pattern values must be > 0")
        if self.dwell < 1:
            raise ValueError("hop dwell must be >= 1")

    def value_at(self, t: int, rng) -> float:
        return self.values[(t // self.dwell) % len(self.values)]

    @property
    def mean(self) -> float:
        return float(np.mean(self.values))

    @property
    def lo(self) -> float:
        return min(self.values)

    @property
    def hi(self) -> float:
        return max(self.values)


_PRI_PW_PATTERNS = (ConstantPattern, StaggerPattern, JitterPattern)
_RF_PATTERNS = (ConstantPattern, HopPattern)


def parse_pattern(tokens: list[str], *, rf: bool = False):
    """Parse a pattern from config tokens.

    Syntax: ``constant <v>`` | ``stagger <v1> <v2> ...`` |
    ``jitter <center> <deviation>`` | ``hop <dwell> <v1> <v2> ...``.
    """
    if not tokens:
        raise ValueError("empty pattern")
    kind, args = tokens[0], tokens[1:]
    try:
        if kind == "constant":
            (v,) = args
            return ConstantPattern(float(v))
        if kind == "stagger" and not rf:
            return StaggerPattern(tuple(float(v) for v in args))
        if kind == "jitter" and not rf:
            center, dev = args
            return JitterPattern(float(center), float(dev))
        if kind == "hop" and rf:
            dwell, *vals = args
            return HopPattern(tuple(float(v) for v in vals), int(dwell))
    except ValueError:
        raise
    except Exception as exc:
        raise ValueError(f"malformed {kind} pattern: {' '.join(tokens)!r}") from exc
    family = "rf" if rf else "pri/pw"
    raise ValueError(f"unknown {family} pattern kind {kind!r}")


def format_pattern(p) -> str:
    if isinstance(p, ConstantPattern):
        return f"constant {p.value:g}"
    if isinstance(p, StaggerPattern):
        return "stagger " + " ".join(f"{v:g}" for v in p.values)
    if isinstance(p, JitterPattern):
        return f"jitter {p.center:g} {p.deviation:g}"
    if isinstance(p, HopPattern):
        return f"hop {p.dwell} " + " ".join(f"{v:g}" for v in p.values)
    raise TypeError(f"not a pattern: {p!r}")


@dataclass(frozen=True)
class EmitterSpec:
    """Pattern triple defining one emitter class."""

    class_id: int
    pri: ConstantPattern | StaggerPattern | JitterPattern
    pw: ConstantPattern | StaggerPattern | JitterPattern
    rf: ConstantPattern | HopPattern

    def __post_init__(self):
        if not isinstance(self.pri, _PRI_PW_PATTERNS):
            raise ValueError(f"class {self.class_id}: unsupported PRI pattern {type(self.pri)}")
        if not isinstance(self.pw, _PRI_PW_PATTERNS):
            raise ValueError(f"class {self.class_id}: unsupported PW pattern {type(self.pw)}")
        if not isinstance(self.rf, _RF_PATTERNS):
            raise ValueError(f"class {self.class_id}: unsupported RF pattern {type(self.rf)}")
        if not self.pw.hi < self.pri.lo:
            raise ValueError(
                f"class {self.class_id}: max PW {self.pw.hi} must stay below min PRI {self.pri.lo}"
            )


@dataclass(frozen=True)
class SimConfig:
    """Full simulation recipe: emitters, per-class counts, lengths, noise."""

    emitters: tuple[EmitterSpec, ...]
    sequences_per_class: tuple[int, ...]
    length_range: tuple[int, int]
    noise_fraction: float
    seed: int

    def __post_init__(self):
        object.__setattr__(self, "emitters", tuple(self.emitters))
        object.__setattr__(self, "sequences_per_class", tuple(self.sequences_per_class))
        if len(self.emitters) != len(self.sequences_per_class):
            raise ValueError("one sequence count per emitter class required")
        ids = [e.class_id for e in self.emitters]
        if ids != list(range(len(self.emitters))):
            raise ValueError(f"emitter class_ids must be 0..C-1 in order, got {ids}")
        if any(c < 2 for c in self.sequences_per_class):
            raise ValueError("each class needs at least 2 sequences")
        lo, hi = self.length_range
        if not (MIN_SEQ_LEN <= lo <= hi <= MAX_SEQ_LEN):
            raise ValueError(
                f"length_range must satisfy {MIN_SEQ_LEN} <= lo <= hi <= {MAX_SEQ_LEN}"
            )
        if not 0.0 <= self.noise_fraction:
            raise ValueError("noise_fraction must be >= 0")

    @property
    def num_classes(self) -> int:
        return len(self.emitters)


def _cap_pw(values: np.ndarray) -> None:
    # Noise can push pw past pri; cap to preserve the pulse invariant.
    np.minimum(values[:, 1], values[:, 0] * (1.0 - 1e-9), out=values[:, 1])


def generate_sequence(
    spec: EmitterSpec, length: int, noise_fraction: float, rng: np.random.Generator
) -> PulseSequence:
    """Generate one sequence: pattern value at each step plus Gaussian noise.

    Noise sigma is `noise_fraction` times the pattern mean of the attribute;
    values are clamped to stay strictly positive. Lengths below the nominal
    dataset minimum of 7 are allowed here (degenerate-length probes);
    dataset generation enforces the [7, 512] range via SimConfig.
    """
    if not 1 <= length <= MAX_SEQ_LEN:
        raise ValueError(f"length must lie in [1, {MAX_SEQ_LEN}], got {length}")
    if noise_fraction < 0.0:
        raise ValueError("noise_fraction must be >= 0")
    patterns = (spec.pri, spec.pw, spec.rf)
    values = np.empty((length, 3), dtype=np.float64)
    for t in range(length):
        for j, pat in enumerate(patterns):
            values[t, j] = pat.value_at(t, rng)
    if noise_fraction > 0.0:
        sigma = np.array([noise_fraction * p.mean for p in patterns])
        values += rng.standard_normal(values.shape) * sigma
        np.maximum(values, VALUE_FLOOR, out=values)
        _cap_pw(values)
    return PulseSequence(values, spec.class_id, check=False)


def generate_dataset(cfg: SimConfig) -> Dataset:
    """Generate the full labelled dataset, deterministic given cfg.seed."""
    sequences = []
    lo, hi = cfg.length_range
    for spec, count in zip(cfg.emitters, cfg.sequences_per_class):
        for i in range(count):
            rng = derive_rng(cfg.seed, "sim", spec.class_id, i)
            length = int(rng.integers(lo, hi + 1))
            sequences.append(generate_sequence(spec, length, cfg.noise_fraction, rng))
    return Dataset(sequences, cfg.num_classes)


def add_noise(ds: Dataset, noise_fraction: float, seed: int) -> Dataset:
    """Perturb every attribute value v by N(0, (noise_fraction * v)^2).

    Labels and lengths are unchanged; values are clamped to a small positive
    floor. noise_fraction 0 returns a value-identical dataset.
    """
    if not 0.0 <= noise_fraction <= 0.5:
        raise ValueError("noise_fraction must lie in [0, 0.5]")
    if noise_fraction == 0.0:
        return Dataset(ds.sequences, ds.num_classes)
    noisy = []
    for i, seq in enumerate(ds.sequences):
        rng = derive_rng(seed, "noise", i)
        values = seq.values.copy()
        values += rng.standard_normal(values.shape) * (noise_fraction * values)
        np.maximum(values, VALUE_FLOOR, out=values)
        _cap_pw(values)
        noisy.append(PulseSequence(values, seq.label, check=False))
    return Dataset(noisy, ds.num_classes)
