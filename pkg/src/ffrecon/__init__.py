"""Reconstruction of multivariate rational functions over Q from modular probes."""

from .driver import (
    BlackBox,
    ReconstructionError,
    ReconstructionOptions,
    Reconstructor,
    Verbosity,
    reconstruct,
)
from .ffield import PRIMES, FieldElement, get_prime, nth_prime, set_prime
from .polyint import SparsePolynomial, zippel_interpolate
from .ratint import RationalFunction, interpolate_rational
from .ratrec import crt_pair, mqrr, race_and_accept, wang_rr

__all__ = [
    "BlackBox",
    "FieldElement",
    "PRIMES",
    "RationalFunction",
    "ReconstructionError",
    "ReconstructionOptions",
    "Reconstructor",
    "SparsePolynomial",
    "Verbosity",
    "crt_pair",
    "get_prime",
    "interpolate_rational",
    "mqrr",
    "nth_prime",
    "race_and_accept",
    "reconstruct",
    "set_prime",
    "wang_rr",
    "zippel_interpolate",
]
