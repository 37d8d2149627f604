"""Online aggregation of anomaly detector scores under delayed feedback.

The games module defines the loss games and their mixable substitutions, the
aggregator runs the share-based weight updates over packs of delayed
feedback, delaysim cuts slot streams into packs, dataio ingests corpora,
oracle builds optimal switching comparators and evaluates the loss
guarantees, and metrics replays full runs and scores them.
"""

from .aggregator import (
    AlgorithmSpec,
    Method,
    Pack,
    ProtocolError,
    StepResult,
    WeightState,
    expert_pack_losses,
    fixed_share_update,
    init,
    intermediate_update,
    normalized_weights,
    predict_pack,
    step,
    variable_share_update,
)
from .dataio import (
    DataError,
    ExpertPanel,
    LabeledSeries,
    load_expert_scores,
    load_series,
    load_windows,
    outcomes_to_windows,
    windows_to_outcomes,
)
from .delaysim import (
    DelaySchedule,
    Fixed,
    RandomUniform,
    format_schedule,
    make_schedule,
    pack_stream,
    parse_schedule,
)
from .games import (
    GameKind,
    GameSpec,
    MixabilityReport,
    clip_scores,
    generalized_prediction,
    loss,
    mixability_holds,
    substitute,
)
from .metrics import (
    RunLedger,
    auc,
    cumulative_average_loss,
    cumulative_loss,
    max_f_score,
    regret_series,
    replay,
)
from .oracle import (
    BoundInputs,
    SuperexpertSpec,
    best_superexpert,
    corollary_bound,
    fixed_share_bound,
    superexpert_avg_loss,
    superexpert_step_losses,
    tuned_alpha,
    variable_share_bound,
)

__version__ = "0.1.0"
