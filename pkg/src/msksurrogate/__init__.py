"""Surrogate models mapping multichannel motion time-series to
musculoskeletal-model output time-series.

Subpackage layout:

- numerics: matrices, RNG streams, spline resampling, summary statistics
- dataset:  trial bundles, kinetic normalization, feature transforms, windows
- nn:       linear/FFNN/RNN networks with exact analytic gradients
- optim:    normalized-MSE loss, SGD/Adam/RMSprop, the training loop
- protocol: subject-exposed/naive splits, grid search, final evaluation
- metrics:  Pearson r, RMSE, NRMSE, and pooled aggregation
- synth:    synthetic tasks with analytic oracles
- cli:      batch command-line surface (synth | train | search | evaluate | report)
"""

from . import cli, dataset, metrics, nn, numerics, optim, protocol, synth

__all__ = [
    "cli",
    "dataset",
    "metrics",
    "nn",
    "numerics",
    "optim",
    "protocol",
    "synth",
]

__version__ = "0.1.0"
