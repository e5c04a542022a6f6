"""Functional sums of stationary Gaussian sequences lifted to rough paths."""
from ._contract import BudgetExceeded
from .gaussian import farima_model, iid_model, make_model, sample_path, sample_paths
from .hermite import HermiteSeries, hermite_rank, monomial, preset
from .limits import characteristics, expected_signature_coeff

__version__ = "0.1.0"
