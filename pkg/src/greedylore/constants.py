"""Seeds, sample sizes and tolerances for every statistical and exact check.

Both ``greedylore check`` and ``tests/test_acceptance.py`` read from here, so
a tolerance is changed in one place or not at all.
"""

# exact-arithmetic slack
ORTHO_TOL = 1e-10
RECON_TOL = 1e-8
PYTHAGORAS_TOL = 1e-8
IDEMPOTENCE_TOL = 1e-10
EF_DECOMPOSITION_TOL = 1e-12
NULLIFICATION_TOL = 1e-10
ORTHO_COMPLEMENT_TOL = 1e-10
MSGD_SCALE_TOL = 1e-12
CONTRACTION_SLACK = 1e-12
GALORE_EQUIV_TOL = 1e-8

# Monte-Carlo
STDERR_MULTIPLIER = 3.0

# contraction of exact top-r selection, random triples
TOPR_SEED = 20240601
TOPR_TRIALS = 1000
TOPR_ROWS = (4, 16, 64)
TOPR_MAX_COLS = 96

# unbiased sketch estimator
SKETCH_SEED = 31337
SKETCH_MATRICES = 5
SKETCH_SHAPE = (8, 12)
SKETCH_NODES = 4
SKETCH_DRAWS = 200_000

# expected contraction of approximate top-r
APPROX_TOPR_SEED = 4242
APPROX_TOPR_SHAPE = (8, 12)
APPROX_TOPR_RANKS = (1, 2, 4)
APPROX_TOPR_DRAWS = 10_000

# top-k membership ordering for independent Gaussians
MEMBERSHIP_SEED = 777
MEMBERSHIP_TRIALS = 100_000
MEMBERSHIP_SIGMAS = (5.0, 4.0, 3.0, 2.0, 1.0)
MEMBERSHIP_KS = (1, 4)
MEMBERSHIP_EXTRA_DIMS = (3, 5, 8)

# fixed-projector error feedback
NULLIFY_SEED = 1001
NULLIFY_SHAPE = (16, 24)
NULLIFY_RANK = 4
NULLIFY_PERIOD = 50

# counterexample
STALL_L = 1.0
STALL_GAMMA = 0.5
STALL_PERIOD = 20
STALL_MIN_RATIO = 0.999999

# ledger exactness
LEDGER_SHAPE = (64, 64)
LEDGER_RANK = 8
LEDGER_PERIOD = 16
LEDGER_STEPS = 160
LEDGER_FORMULA_GREEDYLORE = 832
LEDGER_FORMULA_GALORE = 768

# desk-scale convergence
CONV_SHAPE = (32, 32)
CONV_L = 1.0
CONV_SIGMA = 1.0
CONV_NODES = 4
CONV_HETEROGENEITY = 1.0
CONV_RANK = 4
CONV_PERIOD = 25
CONV_STEPS = 5000
CONV_SEED = 7
CONV_MSGD_BETA = 0.9
CONV_MSGD_LR = 0.05
CONV_ADAM_LR = 0.01
CONV_ADAM_BETA1 = 0.9
CONV_ADAM_BETA2 = 0.99
CONV_ADAM_EPS = 1e-8
CONV_MAX_RATIO = 2.0
TAIL_FRACTION = 0.1

SPEEDUP_SIGMA = 4.0
SPEEDUP_NODES = (1, 4, 16)
SPEEDUP_BASE_LR = 0.02
SPEEDUP_SEED = 11
SPEEDUP_MAX_RATIO = 0.5

# default replica assertion interval
REPLICA_CHECK_EVERY = 50
