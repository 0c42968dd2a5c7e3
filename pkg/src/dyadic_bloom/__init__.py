"""Biparameter dyadic harmonic analysis on finite grids.

Haar bases, A_p weights, maximal and square functions, paraproducts, dyadic
shifts, weighted BMO norms and commutator norm estimates, with an experiment
harness on top.
"""
from .core import (Axis, CubeId, DyadicGrid, GridFunction, HaarSpectrum, MartingaleMask,
                   Rectangle, haar_forward, haar_inverse, haar_tensor, indicator,
                   is_fully_cancellative, local_mean_oscillation_expansion, martingale_transform,
                   project_fully_cancellative, random_function, random_series,
                   rectangle_average, rectangle_average_series)
from .weights import (BloomTriple, Weight, WeightFamilyConfig, ap_characteristic,
                      averaged_weight, cascade_weight, conjugate_weight, power_weight,
                      unit_weight, weighted_lp_norm)
from .maxsquare import (ShiftComplexity, maximal_dyadic, mixed_square_maximal,
                        shifted_square_function, square_function)
from .paraproducts import (ParaproductKind, Symbol, apply_paraproduct, paraproduct_operator,
                           product_decomposition)
from .shifts import (CancellativeShift, EnsembleConfig, PartialSymbolSequence, ProductBmoSymbol,
                     make_shift, random_cancellative_shift, sample_shift_ensemble)
from .bmo import (bmo_little_norm, bmo_product_norm, bmo_rectangular_norm, duality_ratio,
                  h1_norm, john_nirenberg_variants)
from .linops import GridOperator, NormEstimate, operator_norm
from .commutators import (commutator_apply, commutator_operator, hilbert_tensor,
                          lower_bound_ratio, remainder_cancellative, remainder_full_mixed,
                          remainder_full_standard, upper_bound_ratio)
from .experiments import ExperimentConfig, ExperimentReport, emit_plot_data, run_suite

__version__ = "0.1.0"
