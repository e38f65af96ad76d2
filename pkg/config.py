"""Configuration defaults for ordinal reward modeling."""

# Ordinal scale
# Levels run over {-K..K}; K=3 matches a -3..+3 Likert comparison scale.
DEFAULT_K = 3
DEFAULT_THRESHOLD_MODE = "symmetric"  # "symmetric" or "asymmetric"

# Reward scorer
# Toy scorers stand in for an LLM reward head.
SCORER_KIND = "linear"  # "linear" or "mlp"
SCORER_DIM = 16         # feature dimension d
SCORER_HIDDEN = 32      # MLP hidden width h

# Loss tables, indexed by preference strength 1..K
# None means "derive from K": margin m(k) = k, weight m(k) = k,
# soft label p(k) = 0.65 + 0.3 * k / K (gives 0.75, 0.85, 0.95 at K=3).
MARGIN_TABLE = None
SCALED_TABLE = None
SOFT_LABEL_TABLE = None
SOFT_LABEL_BASE = 0.65
SOFT_LABEL_SPAN = 0.3

# Training
EPOCHS = 8
BATCH_SIZE = 64
OPTIMIZER = "adam"      # "adam" or "sgd"
LR_PHI_SGD = 1e-2       # toy-scale rates; LLM-scale runs use ~1e-6
LR_PHI_ADAM = 1e-3
LR_ALPHA = 1e-3         # constant schedule
SCHED_PHI = "cosine_warmup"  # "cosine_warmup" or "constant"
WARMUP_FRAC = 0.1
ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8
REG_LAMBDA = 1.0        # weight on ||zeta||^2, added once per step
ASYNC_INTERVAL = 1      # update thresholds every N steps
THRESHOLD_OPT = "reparam"  # "reparam" or "projected"
PROJECTION_EPS = 1e-3   # minimum gap for projected gradient descent
MIN_THRESHOLD_GAP = 1e-12  # floor on exp(alpha) increments; exp underflows below alpha ~ -745
TRAJECTORY_INTERVAL = 1  # steps between threshold snapshots

# Checkpoint selection
TRANSITION_WINDOW_FRAC = 0.05  # trailing fraction of steps inspected
TRANSITION_TOLERANCE = 0.05    # sup-norm threshold movement marking a transition
VAL_LOSS_PERCENTILE = None     # e.g. 90.0 drops checkpoints above that percentile

# Post-hoc calibration
CALIBRATION_EPOCHS = 100
CALIBRATION_LR = 0.01
CALIBRATION_MIN_GAP = 1e-3

# Metrics
ACC_WITHIN_LEVELS = (0, 1, 2)
MARGIN_BIN_WIDTH = 0.5

# Gradient check
GRADCHECK_STEP = 1e-6
GRADCHECK_RTOL = 1e-5
GRADCHECK_FLOOR = 1e-2   # denominator floor for relative error
GRADCHECK_DRAWS = 100
GRADCHECK_DIM = 6
GRADCHECK_HIDDEN = 5

# Synthetic data
FEATURE_SCALE = 1.0
RNG_ALGORITHM = "philox4x64-10"
GENERATOR_STREAM = 0
NOISE_STREAM = 1
SHUFFLE_STREAM = 2
INIT_STREAM = 3
SPLIT_STREAM = 4
GRADCHECK_STREAM = 5

# Logging
LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"

TOOL_VERSION = "1.0.0"
