"""Interpolating information criterion for overparameterised regression."""

from .core import (GibbsLikelihood, PredictorModel, Prior, RegressionDataset, SquaredLoss, custom_prior,
                   eval_stacked, isotropic_gaussian, jacobian, linear_model, norm_squared_model, substream,
                   tanh_network, total_loss)
from .criteria import (CriterionReport, bic_linear, bic_ridge, free_energy_bar, free_energy_constant,
                       iic, iic_linear, optimal_tau, relative_curvature)
from .duality import (dual_prior_linear, evidence_dual, evidence_primal, fiber_density_mc,
                      gaussian_convolution_evidence, radial_integral)
from .errors import IICError
from .geometry import gram_matrix, manifold_hessian, tangent_frame, tangent_projector
from .interpolate import anneal_map, map_estimate, pinv_interpolator, solve_interpolator
from .laplace import curve_integral, laplace_manifold, laplace_point, quadrature_nd

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
