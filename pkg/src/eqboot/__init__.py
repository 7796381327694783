"""Equivariant parametric bootstrap for linear inverse problems."""

from .bootstrap import (
    BootstrapConfig,
    BootstrapResult,
    ConfidenceRegion,
    EquivariantBootstrap,
    confidence_region,
    contains,
    equivariant_bootstrap,
    naive_bootstrap,
    pixelwise_std,
)
from .core import Measurement, NoiseModel, RngStream, Signal, derive_stream, sample_noise
from .estimators import (
    ISTA,
    LearnedLinear,
    LinearMap,
    OracleProjector,
    Tikhonov,
    ista,
    learned_linear,
    oracle_projector,
    tikhonov,
)
from .experiments import (
    CoverageCurve,
    SignalModel,
    ablation_fig5,
    coverage_curve,
    make_invariant_model,
    psnr,
    sample_signal,
)
from .groups import GroupAction, GroupElement, act, act_inverse, sample_element
from .operators import LinearOperator, circular_blur, gaussian_cs, inpainting_mask
from .theory import bias_decomposition, equivariance_defect, measurement_consistency_check, reynolds

__version__ = "0.1.0"
