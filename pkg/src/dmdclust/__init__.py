"""Spectral features of multidimensional sequences from DMD / matrix pencil
decompositions of delay-embedded data, and clustering by shared dynamics."""
from .clustering import BACKEND, ConnectivityGraph, Dendrogram, cut, ward_constrained
from .dmd import TruncationPolicy, decompose, single_series_fit
from .errors import NumericalError, ValidationError
from .features import FeatureModel, FeatureSet, embed, extract, fit
from .hankel import (DelayMatrixPair, build_ensemble_by_series, build_ensemble_by_time,
                     build_single_series, build_snapshots)
from .matrix_pencil import pencil_decompose
from .signal_model import (DampedSinusoidModel, GrainImage, LatticeRegion, SeriesEnsemble,
                           make_lattice_image, make_toy_ensemble, synthesize)

__version__ = "0.1.0"
