"""Lindley-geometric lifetime distribution: evaluation, moments, reliability
functionals, order statistics, likelihood inference and model comparison."""
from .core import (
    DensityKind,
    DensityShape,
    HazardKind,
    HazardShape,
    LGParams,
    cdf,
    classify_density,
    classify_hazard,
    hazard,
    logpdf,
    pdf,
    quantile,
    reversed_hazard,
    sample,
    survival,
)
from .errors import (
    ConvergenceError,
    DataValidationError,
    DomainError,
    LGError,
    ParameterError,
    SingularInformationError,
    TailError,
)
from .inference import (
    EMConfig,
    FitResult,
    fit_direct,
    fit_em,
    log_likelihood,
    lr_test,
    observed_information,
    score,
    wald_ci,
)
from .lifetime import (
    bonferroni_curve,
    curve_grid,
    gini_index,
    lorenz_curve,
    mean_deviation_about_mean,
    mean_deviation_about_median,
    mean_residual_life,
    mean_reversed_residual_life,
    residual_moment,
    reversed_residual_moment,
    scaled_ttt,
)
from .models import GofReport, ModelSpec, compare_models, fit_model, gof_statistics, model_pdf_cdf
from .moments import mean, mgf_eval, pwm, raw_moment, variance
from .orderstats import OrderStatSpec, orderstat_moment, orderstat_pdf
from .sample import Sample
from .series import MomentResult, SeriesControl

__version__ = "0.1.0"
