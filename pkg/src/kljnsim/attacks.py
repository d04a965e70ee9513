"""Eavesdropper protocols exploiting the parasitic periodic source.

Two regimes, split by where the source frequency sits relative to the
clock frequency:

* Below the clock (many periods per source cycle) the source is nearly
  constant within a period, so it shifts the wire voltage's mean.  Eve
  integrates the known source over each period to form a threshold and
  compares the fraction of wire samples above it against one half.

* Above the clock (many source cycles per period) the shift averages
  out, but the source stands out spectrally.  Eve rehearses offline on
  her own simulations (she knows every public parameter, only the
  resistor coins are secret): she tabulates the expected noise spectrum
  and the two possible divider-scaled source band powers, then classifies
  each measured period by background-subtracted band power against the
  midpoint of the two.

Eve's rehearsal uses a seed stream disjoint from the victim session, so
she never replays the exact noise she is attacking.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from enum import Enum
from math import cos, floor, pi, sin
from pathlib import Path

import numpy as np

from .channel import KljnConfig, PeriodicSource, Situation, divider_ac, wire_noise
from .errors import ConfigurationError, ShapeMismatchError
from .noise import (
    NoiseSpec,
    SampledTrace,
    Spectrum,
    generate_unit_gbwn,
    johnson_scale,
    mix_seed,
    periodogram,
)

__all__ = [
    "AttackConfig",
    "AttackMode",
    "HfPreparation",
    "LfDecision",
    "default_band",
    "hf_ac_power",
    "hf_decide",
    "hf_prepare",
    "lf_decide",
    "lf_gamma",
    "lf_threshold",
    "load_hf_preparation",
    "save_hf_preparation",
]

_STREAM_EAVESDROPPER = 3  # rehearsal noise, disjoint from the victim's streams
_TIE_SALT = 0x7E5EEDC011  # fixed salt for the exact-tie coin


class AttackMode(Enum):
    LOW_FREQ = "lowfreq"
    HIGH_FREQ = "highfreq"


@dataclass(frozen=True)
class AttackConfig:
    """Eavesdropper settings.

    Attributes:
        mode: Which protocol to run.
        kappa: Threshold scale for the low-frequency protocol.  One half
            places the threshold between the two divider-scaled source
            means; the textbook value 1.0 sits above both and is kept
            available for comparison runs.
        ensemble_size: Rehearsal periods for the spectral background,
            at least 100.
        band: Optional explicit spectral window (f_lo, f_hi) in Hz; when
            omitted the window is centered on the source frequency, see
            :func:`default_band`.
        eve_knows_source: Whether Eve knows the source waveform exactly.
            The low-frequency protocol requires it.
    """

    mode: AttackMode
    kappa: float = 0.5
    ensemble_size: int = 1000
    band: tuple[float, float] | None = None
    eve_knows_source: bool = True

    def __post_init__(self) -> None:
        if not self.kappa > 0:
            raise ConfigurationError(f"kappa must be positive, got {self.kappa}")
        if self.ensemble_size < 100:
            raise ConfigurationError(
                f"ensemble_size must be at least 100, got {self.ensemble_size}"
            )
        if self.band is not None:
            lo, hi = self.band
            if not 0 < lo < hi:
                raise ConfigurationError(f"band must satisfy 0 < lo < hi, got {self.band}")
            object.__setattr__(self, "band", (float(lo), float(hi)))


@dataclass(frozen=True)
class LfDecision:
    """Outcome of the threshold-crossing test for one period.

    ``guess`` is None when the period is undetermined (zero threshold or
    crossing fraction exactly one half); those periods are discarded from
    the accuracy accounting entirely.
    """

    guess: Situation | None
    gamma: float
    threshold: float


@dataclass(frozen=True)
class HfPreparation:
    """Eve's rehearsed spectral reference.

    Attributes:
        noise_background: Ensemble-averaged periodogram of the noise-only
            wire voltage over one bit period.
        ac_threshold: Midpoint of the band-averaged source power in the
            two secure situations.
        band: Spectral window (f_lo, f_hi) used for band averages.
        ensemble_size: Number of rehearsal periods averaged.
    """

    noise_background: Spectrum
    ac_threshold: float
    band: tuple[float, float]
    ensemble_size: int


def lf_threshold(
    source: PeriodicSource, period_index: int, tau: float, kappa: float
) -> float:
    """Decision threshold for one period: kappa times the source's mean.

    Period ``i`` spans [(i-1)*tau, i*tau] with i counted from 1.  The mean
    is evaluated in closed form; when the period holds an exactly integer
    number of source cycles the mean is exactly zero, and zero is returned
    as such so downstream discarding triggers reliably.

    Args:
        source: The known parasitic source.
        period_index: 1-based period number.
        tau: Period length in seconds.
        kappa: Threshold scale, positive.

    Returns:
        Threshold in volts; sign matters, zero means "cannot decide".
    """
    if period_index < 1:
        raise ConfigurationError(
            f"period_index must be at least 1, got {period_index}"
        )
    if not tau > 0:
        raise ConfigurationError(f"tau must be positive, got {tau}")
    if not kappa > 0:
        raise ConfigurationError(f"kappa must be positive, got {kappa}")
    if source.frequency == 0.0:
        return kappa * source.amplitude * cos(source.phase)
    cycles = source.frequency * tau
    if cycles == floor(cycles):
        return 0.0
    omega = 2.0 * pi * source.frequency
    t_end = period_index * tau
    t_start = t_end - tau
    mean = (sin(omega * t_end + source.phase) - sin(omega * t_start + source.phase)) / (
        omega * tau
    )
    return kappa * source.amplitude * mean


def lf_gamma(wire: SampledTrace, threshold: float) -> float:
    """Fraction of wire samples strictly above the threshold."""
    return float(np.count_nonzero(wire.samples > threshold)) / len(wire)


def lf_decide(threshold: float, gamma: float) -> LfDecision:
    """Classify one period from its threshold and crossing fraction.

    A positive threshold with a majority of samples above it (or a negative
    threshold with a minority) points to the situation where Bob holds the
    high resistor and the divider passes most of the source.  Exact zero
    threshold or exact half crossing leaves the period undetermined.
    """
    if threshold == 0.0 or gamma == 0.5:
        return LfDecision(None, gamma, threshold)
    if (threshold > 0.0) == (gamma > 0.5):
        return LfDecision(Situation.LH, gamma, threshold)
    return LfDecision(Situation.HL, gamma, threshold)


def default_band(f_a: float, bin_width: float, f_b: float) -> tuple[float, float]:
    """Spectral window of five bins on each side of the source frequency.

    Clipped to the open-DC interval (0, f_b]: the lower edge never goes
    below the first non-DC bin and the upper edge never beyond the noise
    bandwidth.  For source frequencies within five bins of DC this makes
    the usable window asymmetric and smaller, which genuinely weakens the
    spectral protocol near the clock frequency.
    """
    if not 0 < f_a <= f_b:
        raise ConfigurationError(
            f"source frequency must lie in (0, f_b], got {f_a} with f_b={f_b}"
        )
    lo = max(f_a - 5.0 * bin_width, bin_width)
    hi = min(f_b, f_a + 5.0 * bin_width)
    if not lo < hi:
        raise ConfigurationError(
            f"degenerate spectral window [{lo}, {hi}] for f_a={f_a}"
        )
    return (lo, hi)


def _band_mask(freqs: np.ndarray, band: tuple[float, float]) -> np.ndarray:
    lo, hi = band
    mask = (freqs >= lo) & (freqs <= hi)
    mask[0] = False  # DC bin never contributes to band averages
    if not np.any(mask):
        raise ConfigurationError(f"band [{lo}, {hi}] contains no spectrum bins")
    return mask


def hf_prepare(config: KljnConfig, attack: AttackConfig) -> HfPreparation:
    """Rehearse the spectral attack offline.

    Simulates ``attack.ensemble_size`` secure periods (alternating the two
    secure situations; the ideal loop's noise statistics are identical in
    both) with rehearsal seeds derived from the session seed on a disjoint
    stream.  Produces the ensemble-averaged noise periodogram and the
    midpoint threshold between the band-averaged source power with the
    divider the two situations would apply.

    Raises:
        ConfigurationError: If the band reaches outside (0, f_b] or holds
            no bins.
    """
    spb = config.samples_per_bit
    f_s = config.sample_rate
    bin_width = f_s / spb
    if attack.band is not None:
        lo, hi = attack.band
        if hi > config.f_b:
            raise ConfigurationError(
                f"band upper edge {hi} exceeds noise bandwidth {config.f_b}"
            )
        band = attack.band
    else:
        band = default_band(config.source.frequency, bin_width, config.f_b)

    freqs = np.arange(spb // 2 + 1) * bin_width
    mask = _band_mask(freqs, band)

    rehearsal_seed = mix_seed(config.seed, _STREAM_EAVESDROPPER)
    r_low, r_high = config.resistors.r_low, config.resistors.r_high
    sample_offsets = np.arange(spb)

    background_sum = np.zeros(spb // 2 + 1)
    lh_power_sum = 0.0
    hl_power_sum = 0.0
    for m in range(attack.ensemble_size):
        if m % 2 == 0:
            r_alice, r_bob = r_low, r_high
        else:
            r_alice, r_bob = r_high, r_low
        alice_noise = johnson_scale(
            generate_unit_gbwn(NoiseSpec(spb, f_s, config.f_b, mix_seed(rehearsal_seed, m, 0))),
            r_alice,
            config.t_eff,
            config.f_b,
        )
        bob_noise = johnson_scale(
            generate_unit_gbwn(NoiseSpec(spb, f_s, config.f_b, mix_seed(rehearsal_seed, m, 1))),
            r_bob,
            config.t_eff,
            config.f_b,
        )
        background_sum += periodogram(wire_noise(r_alice, r_bob, alice_noise, bob_noise)).bins

        times = (m * spb + sample_offsets) / f_s
        source_trace = SampledTrace(config.source.sample(times), f_s)
        lh_bins = periodogram(divider_ac(r_low, r_high, source_trace)).bins
        hl_bins = periodogram(divider_ac(r_high, r_low, source_trace)).bins
        lh_power_sum += float(np.mean(lh_bins[mask]))
        hl_power_sum += float(np.mean(hl_bins[mask]))

    m_count = attack.ensemble_size
    background = Spectrum(
        bins=background_sum / m_count,
        bin_width=bin_width,
        band=(0.0, f_s / 2.0),
    )
    ac_threshold = (lh_power_sum + hl_power_sum) / (2.0 * m_count)
    return HfPreparation(background, ac_threshold, band, m_count)


def hf_ac_power(wire: SampledTrace, prep: HfPreparation) -> float:
    """Background-subtracted band power of one measured period.

    Subtracts the rehearsed noise spectrum bin by bin and averages over the
    window without clipping, so the estimator stays unbiased; negative
    values simply mean the period held less band power than the noise
    average.
    """
    spectrum = periodogram(wire)
    background = prep.noise_background
    if len(spectrum) != len(background) or spectrum.bin_width != background.bin_width:
        raise ShapeMismatchError(
            f"measured spectrum ({len(spectrum)} bins @ {spectrum.bin_width} Hz) does "
            f"not match background ({len(background)} bins @ {background.bin_width} Hz)"
        )
    mask = _band_mask(spectrum.frequencies(), prep.band)
    return float(np.mean(spectrum.bins[mask] - background.bins[mask]))


def hf_decide(ac_power: float, prep: HfPreparation) -> Situation:
    """Classify one period by band power against the rehearsed midpoint.

    Above the midpoint means the strong divider (Bob high); below means the
    weak one.  An exact tie is resolved by a deterministic fair coin keyed
    on the measured value's bit pattern, so accounting never stalls and
    reruns reproduce byte for byte.
    """
    if ac_power > prep.ac_threshold:
        return Situation.LH
    if ac_power < prep.ac_threshold:
        return Situation.HL
    bits = int(np.float64(ac_power).view(np.uint64))
    return Situation.LH if mix_seed(_TIE_SALT, bits) & 1 else Situation.HL


def save_hf_preparation(prep: HfPreparation, path: str | Path) -> None:
    """Persist a rehearsal result as CSV.

    Layout: one scalar header row (threshold, window edges, ensemble size)
    followed by the background spectrum as (frequency_hz, background_v2)
    rows, all floats with 17 significant digits.
    """
    background = prep.noise_background
    freqs = background.frequencies()
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(("ac_threshold_v2", "f_lo_hz", "f_hi_hz", "ensemble_size"))
        writer.writerow(
            (
                f"{prep.ac_threshold:.17g}",
                f"{prep.band[0]:.17g}",
                f"{prep.band[1]:.17g}",
                prep.ensemble_size,
            )
        )
        writer.writerow(("frequency_hz", "background_v2"))
        for f, b in zip(freqs, background.bins):
            writer.writerow((f"{f:.17g}", f"{b:.17g}"))


def load_hf_preparation(path: str | Path) -> HfPreparation:
    """Reload a rehearsal result written by :func:`save_hf_preparation`."""
    with open(path, newline="") as handle:
        rows = list(csv.reader(handle))
    if len(rows) < 5 or rows[0] != ["ac_threshold_v2", "f_lo_hz", "f_hi_hz", "ensemble_size"]:
        raise ConfigurationError(f"{path} is not a rehearsal file")
    threshold = float(rows[1][0])
    band = (float(rows[1][1]), float(rows[1][2]))
    ensemble_size = int(rows[1][3])
    if rows[2] != ["frequency_hz", "background_v2"]:
        raise ConfigurationError(f"{path} is missing the spectrum column header")
    freqs = np.array([float(r[0]) for r in rows[3:]])
    bins = np.array([float(r[1]) for r in rows[3:]])
    bin_width = freqs[1] - freqs[0]
    background = Spectrum(bins=bins, bin_width=bin_width, band=(0.0, float(freqs[-1])))
    return HfPreparation(background, threshold, band, ensemble_size)
