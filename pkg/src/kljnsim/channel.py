"""Two-party resistor-switching loop with a parasitic periodic source.

Alice and Bob each pick one of two resistor values per clock period and
connect its noise generator to a shared wire.  The mixed-choice periods
(one low, one high) are the secure ones; an eavesdropper measuring wire
quantities cannot tell the two apart from noise statistics alone because
the loop is symmetric under swapping the ends.  A periodic source hiding
in series with Alice's resistor breaks that symmetry: the wire picks up
the source through a resistive divider whose ratio depends on who holds
the high resistor.

All wire quantities follow from two-resistor circuit algebra:

* divider:  u_ac   = r_bob * source / (r_alice + r_bob)
* noise:    u_wire = (r_alice * u_bob_n + r_bob * u_alice_n) / (r_alice + r_bob)
* current:  i_wire = (source + u_alice_n - u_bob_n) / (r_alice + r_bob)

with the current sign positive when flowing from Alice toward Bob.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np

from .errors import ConfigurationError, ShapeMismatchError
from .noise import NoiseSpec, SampledTrace, generate_unit_gbwn, johnson_scale, mix_seed

__all__ = [
    "BitPeriodRecord",
    "KljnConfig",
    "PeriodicSource",
    "ResistorPair",
    "SESSION_CSV_COLUMNS",
    "Situation",
    "divider_ac",
    "dump_session_csv",
    "simulate_session",
    "wire_current",
    "wire_noise",
]

# Disjoint sub-stream labels under one session seed.
_STREAM_CHOICES = 1  # resistor coin flips
_STREAM_NOISE = 2  # per-period thermal segments


class Situation(Enum):
    """Joint resistor choice for one period; first letter Alice, second Bob."""

    LL = "LL"
    LH = "LH"
    HL = "HL"
    HH = "HH"

    @classmethod
    def from_choices(cls, alice: str, bob: str) -> "Situation":
        try:
            return cls(alice + bob)
        except ValueError:
            raise ConfigurationError(
                f"resistor choices must be 'L' or 'H', got {alice!r}, {bob!r}"
            ) from None

    @property
    def alice(self) -> str:
        return self.value[0]

    @property
    def bob(self) -> str:
        return self.value[1]

    @property
    def secure(self) -> bool:
        """True for the mixed situations that contribute key bits."""
        return self.value[0] != self.value[1]

    @property
    def bit(self) -> int:
        """Key bit carried by a secure situation: LH is 0, HL is 1."""
        if self is Situation.LH:
            return 0
        if self is Situation.HL:
            return 1
        raise ConfigurationError(f"situation {self.value} carries no key bit")


@dataclass(frozen=True)
class ResistorPair:
    """The two switchable resistor values, in ohms, with r_low < r_high."""

    r_low: float
    r_high: float

    def __post_init__(self) -> None:
        if not 0 < self.r_low < self.r_high:
            raise ConfigurationError(
                f"need 0 < r_low < r_high, got {self.r_low}, {self.r_high}"
            )

    def resistance(self, choice: str) -> float:
        if choice == "L":
            return self.r_low
        if choice == "H":
            return self.r_high
        raise ConfigurationError(f"resistor choice must be 'L' or 'H', got {choice!r}")

    @property
    def parallel(self) -> float:
        """Parallel combination r_low * r_high / (r_low + r_high)."""
        return self.r_low * self.r_high / (self.r_low + self.r_high)


@dataclass(frozen=True)
class PeriodicSource:
    """Cosine source in series with Alice's resistor.

    ``amplitude`` is the peak value in volts; zero switches the source off.
    Phase is referenced to the session's global t = 0, so the waveform is
    continuous across period boundaries.
    """

    amplitude: float
    frequency: float
    phase: float = 0.0

    def __post_init__(self) -> None:
        if self.amplitude < 0:
            raise ConfigurationError(
                f"amplitude must be non-negative, got {self.amplitude}"
            )
        if self.frequency < 0:
            raise ConfigurationError(
                f"frequency must be non-negative, got {self.frequency}"
            )

    def sample(self, times: np.ndarray) -> np.ndarray:
        """Evaluate the source at the given times (seconds)."""
        return self.amplitude * np.cos(
            2.0 * math.pi * self.frequency * np.asarray(times, dtype=np.float64)
            + self.phase
        )


@dataclass(frozen=True)
class KljnConfig:
    """Full description of one key-exchange session.

    ``samples_per_bit`` is derived, never passed: it is the rounded ratio
    of the sample rate (twice the noise bandwidth ``f_b``) to the clock
    frequency ``f_c``.
    """

    resistors: ResistorPair
    t_eff: float
    f_b: float
    f_c: float
    source: PeriodicSource
    seed: int
    n_secure_bits: int
    samples_per_bit: int = field(init=False)

    def __post_init__(self) -> None:
        if not self.f_c > 0:
            raise ConfigurationError(f"f_c must be positive, got {self.f_c}")
        if not self.f_b > self.f_c:
            raise ConfigurationError(
                f"f_b must exceed f_c, got f_b={self.f_b}, f_c={self.f_c}"
            )
        if self.t_eff < 0:
            raise ConfigurationError(f"t_eff must be non-negative, got {self.t_eff}")
        if self.n_secure_bits < 1:
            raise ConfigurationError(
                f"n_secure_bits must be at least 1, got {self.n_secure_bits}"
            )
        if not 0 <= self.seed < 2**64:
            raise ConfigurationError("seed must fit in 64 bits")
        object.__setattr__(
            self, "samples_per_bit", int(round(2.0 * self.f_b / self.f_c))
        )

    @property
    def sample_rate(self) -> float:
        """Nyquist rate of the noise band: twice f_b."""
        return 2.0 * self.f_b

    @property
    def period_duration(self) -> float:
        """Length of one bit period on the sample grid, in seconds."""
        return self.samples_per_bit / self.sample_rate


@dataclass(frozen=True)
class BitPeriodRecord:
    """One simulated bit period with its ground-truth decomposition.

    ``wire_voltage`` is what an eavesdropper can tap; ``ac_part`` and
    ``noise_part`` are the clean summands kept for validation, and
    ``wire_current`` is only filled in when requested.
    """

    index: int
    situation: Situation
    wire_voltage: SampledTrace
    ac_part: SampledTrace
    noise_part: SampledTrace
    wire_current: SampledTrace | None = None


def _check_pair(r_alice: float, r_bob: float) -> None:
    if not (r_alice > 0 and r_bob > 0):
        raise ConfigurationError(
            f"resistances must be positive, got {r_alice}, {r_bob}"
        )


def _check_same_grid(a: SampledTrace, b: SampledTrace) -> None:
    if len(a) != len(b) or a.sample_rate != b.sample_rate:
        raise ShapeMismatchError(
            f"traces disagree: {len(a)} @ {a.sample_rate} Hz vs "
            f"{len(b)} @ {b.sample_rate} Hz"
        )


def divider_ac(r_alice: float, r_bob: float, source_trace: SampledTrace) -> SampledTrace:
    """Periodic source as seen on the wire, through the resistive divider."""
    _check_pair(r_alice, r_bob)
    scale = r_bob / (r_alice + r_bob)
    return SampledTrace(scale * source_trace.samples, source_trace.sample_rate)


def wire_noise(
    r_alice: float,
    r_bob: float,
    alice_noise: SampledTrace,
    bob_noise: SampledTrace,
) -> SampledTrace:
    """Superposed thermal noise on the wire.

    Each end's generator reaches the wire through the opposite end's
    resistor ratio, so Alice's noise is weighted by r_bob and vice versa.
    """
    _check_pair(r_alice, r_bob)
    _check_same_grid(alice_noise, bob_noise)
    samples = (r_alice * bob_noise.samples + r_bob * alice_noise.samples) / (
        r_alice + r_bob
    )
    return SampledTrace(samples, alice_noise.sample_rate)


def wire_current(
    r_alice: float,
    r_bob: float,
    source_trace: SampledTrace,
    alice_noise: SampledTrace,
    bob_noise: SampledTrace,
) -> SampledTrace:
    """Loop current, positive when flowing from Alice toward Bob."""
    _check_pair(r_alice, r_bob)
    _check_same_grid(alice_noise, bob_noise)
    _check_same_grid(source_trace, alice_noise)
    samples = (source_trace.samples + alice_noise.samples - bob_noise.samples) / (
        r_alice + r_bob
    )
    return SampledTrace(samples, source_trace.sample_rate)


def simulate_session(
    config: KljnConfig, include_current: bool = False
) -> list[BitPeriodRecord]:
    """Run one session until the requested number of secure bits accumulated.

    Per period both parties flip independent fair coins for their resistor,
    fresh noise segments are drawn for each end (independent across periods,
    emulating generators re-seeded per clock cycle), and the periodic source
    is evaluated on the global time grid so its phase never resets.

    Args:
        config: Session description.
        include_current: Also record the loop current (validation use).

    Returns:
        All periods in order, secure and non-secure alike.
    """
    spb = config.samples_per_bit
    f_s = config.sample_rate
    chooser = np.random.Generator(
        np.random.Philox(key=mix_seed(config.seed, _STREAM_CHOICES))
    )
    sample_offsets = np.arange(spb)

    records: list[BitPeriodRecord] = []
    secure_count = 0
    index = 0
    while secure_count < config.n_secure_bits:
        alice_pick, bob_pick = chooser.integers(0, 2, size=2)
        alice = "L" if alice_pick == 0 else "H"
        bob = "L" if bob_pick == 0 else "H"
        situation = Situation.from_choices(alice, bob)
        r_alice = config.resistors.resistance(alice)
        r_bob = config.resistors.resistance(bob)

        alice_noise = johnson_scale(
            generate_unit_gbwn(
                NoiseSpec(spb, f_s, config.f_b, mix_seed(config.seed, _STREAM_NOISE, index, 0))
            ),
            r_alice,
            config.t_eff,
            config.f_b,
        )
        bob_noise = johnson_scale(
            generate_unit_gbwn(
                NoiseSpec(spb, f_s, config.f_b, mix_seed(config.seed, _STREAM_NOISE, index, 1))
            ),
            r_bob,
            config.t_eff,
            config.f_b,
        )

        times = (index * spb + sample_offsets) / f_s
        source_trace = SampledTrace(config.source.sample(times), f_s)

        ac_part = divider_ac(r_alice, r_bob, source_trace)
        noise_part = wire_noise(r_alice, r_bob, alice_noise, bob_noise)
        wire_voltage = SampledTrace(ac_part.samples + noise_part.samples, f_s)
        current = None
        if include_current:
            current = wire_current(r_alice, r_bob, source_trace, alice_noise, bob_noise)

        records.append(
            BitPeriodRecord(index, situation, wire_voltage, ac_part, noise_part, current)
        )
        if situation.secure:
            secure_count += 1
        index += 1
    return records


SESSION_CSV_COLUMNS = (
    "period_index",
    "situation",
    "sample_index",
    "u_wire",
    "u_ac",
    "u_noise",
)


def dump_session_csv(records: list[BitPeriodRecord], destination) -> None:
    """Write one row per sample with the wire voltage and its decomposition.

    Voltages are printed with 17 significant digits, enough to reconstruct
    the exact float64 values.  ``destination`` is a path or a text handle.
    """

    def emit(handle) -> None:
        writer = csv.writer(handle)
        writer.writerow(SESSION_CSV_COLUMNS)
        for record in records:
            wire = record.wire_voltage.samples
            ac = record.ac_part.samples
            noi = record.noise_part.samples
            for k in range(wire.size):
                writer.writerow(
                    (
                        record.index,
                        record.situation.value,
                        k,
                        f"{wire[k]:.17g}",
                        f"{ac[k]:.17g}",
                        f"{noi[k]:.17g}",
                    )
                )

    if isinstance(destination, (str, Path)):
        with open(destination, "w", newline="") as handle:
            emit(handle)
    else:
        emit(destination)
