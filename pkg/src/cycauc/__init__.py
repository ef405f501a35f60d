"""Deterministic desk-scale simulator of federated AUC maximization under
cyclic client participation: a stagewise minimax trainer for the squared
surrogate, an active-passive pairwise trainer for general surrogates, a
FedAvg baseline, non-IID data tooling and an exact AUC harness.
"""

__version__ = "0.1.0"

from .data import (  # noqa: F401
    ClientDataset,
    DataError,
    DatasetStats,
    Example,
    FederationLayout,
    class_prior,
    dirichlet_partition,
    flip_labels,
    load_csv,
    make_synthetic,
)
from .losses import (  # noqa: F401
    BarrierHingeLoss,
    LogisticLoss,
    MinimaxState,
    PairwiseLoss,
    QNormHingeLoss,
    SigmoidLoss,
    SquareLoss,
    SquaredHingeLoss,
    make_pairwise_loss,
    minimax_objective,
    minimax_stoch_grad,
    minimax_value,
    optimal_dual,
    pairwise_objective,
    psi_grad,
    psi_value,
)
from .metrics import NumericError, RoundRecord, RoundRecorder, auc, evaluate  # noqa: F401
from .models import (  # noqa: F401
    LinearModel,
    MlpModel,
    axpy_update,
    init_mlp,
    linear_model,
    load_checkpoint,
    save_checkpoint,
)
from .rng import RngStream  # noqa: F401
from .scheduler import ParticipationPlan, RoundTicket, plan_epoch, rounds_total  # noqa: F401
from .stages import PracticalSchedule, StageConfig, TheoryPLSchedule, TheorySchedule  # noqa: F401
