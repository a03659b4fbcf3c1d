"""Spectral fluctuation statistics for chaotic spectra with missing levels.

Subpackages:
  spectra  level sequences, unfolding, decimation, fluctuation estimators
  rmt      Gaussian-ensemble sampling and spacing-model fits
  theory   analytic fluctuation measures, complete and incomplete
  qgraph   quantum-graph construction and secular-equation eigenvalues
  cli      command-line orchestration and figure-data bundles
"""

from .errors import EstimationFailure, FitFailure, NumericError
from .spectra import (CurveWithErrors, LevelSequence, SpectralEnsemble,
                      decimate, decimate_systematic, number_variance,
                      power_spectrum_estimator, spacing_histogram,
                      spectral_rigidity, truncate_members,
                      unfold_constant_density)
from .theory import (EnsembleClass, MissingLevelParams, SpacingFit,
                     cluster_y2, default_missing_params, delta3_complete,
                     delta3_missing, estimate_phi, form_b, form_factor,
                     p_missing, power_missing, sigma2_complete,
                     sigma2_missing, surmise_fit)
from .rmt import (RandomMatrixSpec, fit_spacing_model, pooled_spacing_fit,
                  sample_spectrum, spectrum_ensemble)

__version__ = "0.1.0"
