"""Spectral equivalence of inner-product kernel matrices on two-class mixtures.

Modules
-------
model
    Mixture sampling, regime diagnostics and oracle test statistics.
hermite
    Hermite fingerprints ``(a0, a1, a2, nu)`` and the cubic equivalent.
kernel
    Dense kernels and the 2-bit packed ternary kernel.
spiked
    Informative low-rank part and operator-norm comparisons.
spectrum
    Limiting spectral density and empirical spectral tools.
prototype
    Three-level piecewise-constant functions and their inverse design.
experiments
    Clustering, parity runs, benchmarks and figure data.
"""
from __future__ import annotations

from .hermite import (
    CubicFunc,
    HermiteCoeffs,
    KernelFunc,
    center,
    compute_coeffs,
    cubic_equivalent,
    hermite_monomial_coeffs,
    hermite_orthonormal_eval,
    parse_function,
)
from .kernel import (
    KernelMatrix,
    TernaryKernel,
    build_kernel,
    build_null_kernel,
    gram,
    quantize_ternary,
    ternary_matvec,
)
from .model import (
    Dataset,
    MixtureParams,
    canonical_scenarios,
    oracle_stats,
    sample_mixture,
    validate_regime,
)
from .prototype import (
    PiecewiseProto,
    coeffs_of_piecewise,
    design_piecewise,
    eval_piecewise,
    feasibility,
)
from .spectrum import (
    DensityCurve,
    LimitParams,
    detect_spikes,
    empirical_esd,
    esd_distance,
    limiting_density,
    stieltjes_solve,
)
from .spiked import (
    ClassStats,
    SpikeModel,
    build_monomial_KI,
    build_spike,
    class_stats,
    gaussian_moment_oracle,
    hadamard_bound_check,
    opnorm_diff,
)

__version__ = "0.1.0"
