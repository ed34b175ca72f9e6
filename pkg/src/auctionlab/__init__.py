"""Machine-learning-powered combinatorial auctions.

A numpy/scipy library for value-query auction mechanisms: synthetic spectrum
valuation models, kernel support-vector regression of bundle values, exact
winner determination over learned valuations, the iterative elicitation
mechanism with VCG-style payments, a combinatorial clock auction baseline,
price-clearing diagnostics, and batch experiment drivers.
"""

from .core import (
    Allocation,
    AuctionOutcome,
    BundleValueReport,
    Payments,
    ReportSet,
    efficiency,
    reported_welfare,
    utility,
    vcg_payments_on_reports,
    wdp_over_reports,
)
from .learning import KernelSpec, LinearModel, OracleModel, SvrModel, learning_error, predict, predict_many, train_linear, train_svr
from .valuemodels import BidderStrategy, DomainInstance, generate_gsvm, generate_twowise
from .wdp import WdpProblem, WdpSolution, solve
from .mlca import LearnerSpec, MlcaConfig, run_mlca, swa_diagnostic, vcg_nearest_payments
from .cca import run_cca
from .diagnostics import PriceProfile, bound_report, certify_clearing
from .experiments import ExperimentConfig, MechanismSpec, kernel_grid, manipulation_study, run_batch

__version__ = "0.1.0"
