"""Convolutional sparse coding with dual graph Laplacian regularisation."""

from .core import (Dictionary, DictionaryFreq, circular_convolve_sum, fallback_dictionary,
                   load_dictionary, lowpass_split, save_dictionary)
from .errors import (DCSCError, DimensionError, FormatError, ParameterError, SolverError,
                     ValidationError)
from .graph import GraphConfig, build_line_graph, build_patch_graph
from .metrics import NoiseSpec, add_gaussian_noise, mse, psnr
from .regularizers import CGConfig
from .solver import SolverConfig, SolveResult, denoise, solve

__version__ = "0.1.0"
