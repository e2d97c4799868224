"""Simulating dysarthric speech from healthy recordings.

Submodules: ``signal_core`` (waveform I/O and STFT), ``rate_mod`` (TD-PSOLA),
``vocoder`` (F0 / envelope / aperiodicity analysis and synthesis),
``features`` (MCEP, BAP and utterance-level evaluation vectors), ``dcgan``,
``pitch_mod``, ``evaluation`` and ``pipeline``.
"""

__version__ = "0.1.0"
