"""Resistor-switching key exchange simulator with an attack toolkit.

The package models the classical two-resistor key exchange loop whose
security rests on thermal noise symmetry, plus an eavesdropper exploiting
a parasitic periodic source in series with one party's resistor.  See the
README for the physics, the protocols, and the command-line interface.
"""

from .attacks import (
    AttackConfig,
    AttackMode,
    HfPreparation,
    LfDecision,
    default_band,
    hf_ac_power,
    hf_decide,
    hf_prepare,
    lf_decide,
    lf_gamma,
    lf_threshold,
    load_hf_preparation,
    save_hf_preparation,
)
from .channel import (
    SESSION_CSV_COLUMNS,
    BitPeriodRecord,
    KljnConfig,
    PeriodicSource,
    ResistorPair,
    Situation,
    divider_ac,
    dump_session_csv,
    simulate_session,
    wire_current,
    wire_noise,
)
from .errors import ConfigurationError, ShapeMismatchError
from .experiment import (
    SWEEP_CSV_COLUMNS,
    AttackOutcome,
    DefenseKind,
    DefenseSpec,
    SweepPoint,
    default_u_eff_grid,
    notch_filter,
    run_point,
    sweep,
    teff_of_ueff,
    u_eff_of_teff,
    write_sweep_csv,
)
from .noise import (
    BOLTZMANN,
    NoiseSpec,
    SampledTrace,
    Spectrum,
    generate_unit_gbwn,
    johnson_scale,
    mix_seed,
    periodogram,
)

__version__ = "0.1.0"

__all__ = [
    "AttackConfig",
    "AttackMode",
    "AttackOutcome",
    "BOLTZMANN",
    "BitPeriodRecord",
    "ConfigurationError",
    "DefenseKind",
    "DefenseSpec",
    "HfPreparation",
    "KljnConfig",
    "LfDecision",
    "NoiseSpec",
    "PeriodicSource",
    "ResistorPair",
    "SESSION_CSV_COLUMNS",
    "SWEEP_CSV_COLUMNS",
    "SampledTrace",
    "ShapeMismatchError",
    "Situation",
    "Spectrum",
    "SweepPoint",
    "default_band",
    "default_u_eff_grid",
    "divider_ac",
    "dump_session_csv",
    "generate_unit_gbwn",
    "hf_ac_power",
    "hf_decide",
    "hf_prepare",
    "johnson_scale",
    "lf_decide",
    "lf_gamma",
    "lf_threshold",
    "load_hf_preparation",
    "mix_seed",
    "notch_filter",
    "periodogram",
    "run_point",
    "save_hf_preparation",
    "simulate_session",
    "sweep",
    "teff_of_ueff",
    "u_eff_of_teff",
    "wire_current",
    "wire_noise",
    "write_sweep_csv",
]
