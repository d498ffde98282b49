"""Quantization dimensions of measures from dyadic-grid multifractal quantities."""

from .closed_forms import (SimilarSystem, beta_inhomogeneous, critical_q, solve_beta_selfsim,
                           solve_epsilon, solve_kr)
from .config import RunConfig, emit_config, parse_config
from .dyadic import DyadicCube, MassTable
from .errors import (ConfigError, DomainError, FracQuantError, InputError, InvalidModelError,
                     PrecisionError, ResourceError)
from .measures import (AtomicMeasure, EmpiricalSample, InhomogeneousSelfSimilarMeasure,
                       MeasureModel, MixtureMeasure, SelfSimilarMeasure, UniformDensity,
                       cantor_measure, dirac, measure_from_dict, sierpinski_tetraeder)
from .multifractal import coarse_dimensions, count_N_alpha, separated_family
from .partition import build_Pt, gamma_n, partition_complexity, partition_count_exponent
from .quantization import (Codebook, estimate_Dr, eval_error, lloyd_refine, lower_witness,
                           upper_quantizer)
from .spectrum import (SpectrumFunction, beta_estimate, beta_n, dim_infinity,
                       minkowski_dimension, qdim_from_qr, quantization_dimension,
                       renyi_dimension, solve_qr, spectrum_table)

__version__ = "0.1.0"

__all__ = [
    "SimilarSystem",
    "beta_inhomogeneous",
    "critical_q",
    "solve_beta_selfsim",
    "solve_epsilon",
    "solve_kr",
    "RunConfig",
    "emit_config",
    "parse_config",
    "DyadicCube",
    "MassTable",
    "ConfigError",
    "DomainError",
    "FracQuantError",
    "InputError",
    "InvalidModelError",
    "PrecisionError",
    "ResourceError",
    "AtomicMeasure",
    "EmpiricalSample",
    "InhomogeneousSelfSimilarMeasure",
    "MeasureModel",
    "MixtureMeasure",
    "SelfSimilarMeasure",
    "UniformDensity",
    "cantor_measure",
    "dirac",
    "measure_from_dict",
    "sierpinski_tetraeder",
    "coarse_dimensions",
    "count_N_alpha",
    "separated_family",
    "build_Pt",
    "gamma_n",
    "partition_complexity",
    "partition_count_exponent",
    "Codebook",
    "estimate_Dr",
    "eval_error",
    "lloyd_refine",
    "lower_witness",
    "upper_quantizer",
    "SpectrumFunction",
    "beta_estimate",
    "beta_n",
    "dim_infinity",
    "minkowski_dimension",
    "qdim_from_qr",
    "quantization_dimension",
    "renyi_dimension",
    "solve_qr",
    "spectrum_table",
]
