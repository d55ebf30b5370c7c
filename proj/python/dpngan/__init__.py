"""Python access to the dpngan vocoder library."""

from ._dpngan import (
    ConfigError,
    FormatError,
    ablation_names,
    ada_prelu,
    filter_response,
    gradient_suite,
    mel_spectrogram,
    mfcc,
    periodic_relu,
    profile_text,
    read_wav,
    run_cli,
    sdtw_cost,
    synth_dataset,
    triangle_wave,
    warpq,
    write_wav,
)

__all__ = [
    "ConfigError",
    "FormatError",
    "ablation_names",
    "ada_prelu",
    "filter_response",
    "gradient_suite",
    "mel_spectrogram",
    "mfcc",
    "periodic_relu",
    "profile_text",
    "read_wav",
    "run_cli",
    "sdtw_cost",
    "synth_dataset",
    "triangle_wave",
    "warpq",
    "write_wav",
]
