"""Shoebox-room EDC dataset generation, multi-band EDC prediction and RIR reconstruction."""

__version__ = "0.1.0"

from ._kernels import BACKEND  # noqa: E402

BANDS_HZ = (
    100.0, 125.0, 160.0, 200.0, 250.0, 315.0, 400.0, 500.0, 630.0, 800.0,
    1000.0, 1250.0, 1600.0, 2000.0, 2500.0, 3150.0, 4000.0, 5000.0, 6300.0,
    8000.0, 10000.0, 12500.0, 16000.0, 20000.0,
)
N_BANDS = len(BANDS_HZ)
HEADLINE_BAND = BANDS_HZ.index(1000.0)

__all__ = ["__version__", "BACKEND", "BANDS_HZ", "N_BANDS", "HEADLINE_BAND"]
