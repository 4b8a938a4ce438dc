"""Coupled Maxwell-LLG FDTD engine for magnon-photon hybrid circuits.

Subpackages/modules:

- ``constants`` / ``materials``: physical constants, unit conversions, per-cell
  material description.
- ``grid``: staggered-lattice storage for E, H, M.
- ``em`` / ``llg``: the explicit electromagnetic update and the iterative
  trapezoidal magnetization update that together form the coupled stepper.
- ``sim``: run orchestration, bias sweeps, probe recording, dataset curation.
- ``oracle``: closed-form references (Kittel law, hybrid eigenfrequencies,
  1D layered-cavity absorption model, Floquet analysis of the driven
  macrospin).
- ``analysis``: FFT spectra, ESPRIT mode extraction, normalization helpers.
- ``surrogate``: physics-informed recurrent sequence model for long-horizon
  magnetization forecasting.
- ``cli``: command-line entry point.
"""

__version__ = "0.1.0"
