"""Symbol-misalignment interference toolkit: closed forms, Monte Carlo and a waveform oracle."""

__version__ = "0.3.0"
