"""Sequence-labeling lab: hierarchical bi-LSTM tagger with a log-frequency
auxiliary loss, a TnT-style trigram HMM baseline, and an experiment harness
(OOV/frequency-bin analysis, learning curves, label-noise curves)."""

__version__ = "0.1.0"
