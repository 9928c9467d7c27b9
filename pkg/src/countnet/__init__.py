"""Count-valued network time series: GNARI and NGNAR models with GNAR and PNAR(1) baselines."""

from .baselines import PnarModel, fit_gnar_cls, fit_pnar1, predict_gnar, predict_pnar, simulate_pnar
from .design import CountSeries, ModelOrder, ParamVector, build_design, build_target
from .dists import PoissonBinomial, binomial_thin, poisson_binomial_pmf
from .gnari import (
    GnariModel,
    fit_gnari_cls,
    gnari_autocovariance,
    gnari_conditional_pmf,
    predict_gnari,
    simulate_gnari,
)
from .network import Network, build_network, fig1_network, network_from_edges
from .ngnar import (
    IDENTITY,
    SOFTPLUS,
    NgnarModel,
    ResponseFunction,
    fit_ngnar_cls,
    fit_ngnar_cmle,
    predict_ngnar,
    simulate_ngnar,
)
from .optimize import OptimizerConfig, adam_minimize
from .results import FitResult

__version__ = "0.1.0"
