"""Discrete spectrum of banded perturbations of S^p + S*^p through matrix Jost functions."""

__version__ = "0.1.0"

from .errors import (BandJostError, EnclosureUnavailable, InputError, NotQuasiSymmetric,
                     NumericalError, UnsupportedConfiguration)
from .model import BandedOperator, TailCertificate, normalize
from .spectrum import AnalysisConfig, analyze, enclosure, find_zeros

__all__ = [
    "BandJostError", "EnclosureUnavailable", "InputError", "NotQuasiSymmetric",
    "NumericalError", "UnsupportedConfiguration", "BandedOperator", "TailCertificate",
    "normalize", "AnalysisConfig", "analyze", "enclosure", "find_zeros", "__version__",
]
