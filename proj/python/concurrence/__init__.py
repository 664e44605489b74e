"""Concurrence coefficient: detect dependence between paired signals by
training a classifier to tell aligned segment pairs from misaligned ones."""

from ._core import (
    ConcurrenceError,
    __version__,
    analytic_pc,
    baseline_test,
    classification_accuracy,
    concurrence_coefficient,
    conditional_mutual_information,
    distance_correlation,
    empirical_p,
    fit_pearson3,
    generate_wavelet,
    generate_xi,
    hsic_gaussian,
    mutual_information,
    pearson_r,
    permutation_null,
    permutation_test,
    read_dataset,
    run_concurrence,
    simulate_scenario,
    ucc,
    wcc,
    write_dataset,
)

__all__ = [name for name in dir() if not name.startswith("_")] + ["__version__"]
