"""Binaural sound-event localization and detection toolkit.

Submodules:

- ``hrtf``: impulse-response windowing, transfer-function division, and
  non-causality compensation
- ``cues``: interaural time/level differences, pinna spectral features,
  and horizontal directivity
- ``features``: the eight-channel binaural time-frequency feature tensor
- ``synth``: spatialized mixture synthesis and the dataset builder
- ``speaker``: lumped-element micro-speaker response prediction
- ``net``: the pure-numpy network graph (forward, counting, weights I/O)
- ``metrics``: segment- and frame-level detection/localization scores
- ``vam``: gradient-weighted attention maps over the feature input
- ``cli``: the ``biseld`` batch command line front end
"""

__version__ = "0.1.0"

from .errors import BiseldError

__all__ = ["BiseldError", "__version__"]
