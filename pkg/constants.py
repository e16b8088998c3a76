import numpy as np

__version__ = "0.1.0"

# matrix_game
DEGENERACY_RTOL = 1e-12

# terminal slack mu
DEFAULT_MU = 1.0

# finite_solver / simulator oracles
DEFAULT_TREE_CAP = 16
EXHAUSTIVE_CAP = 12
ENUMERATION_CAP = 10_000

# lq_nd
LOEWNER_TOL = 1e-10
SINGULAR_EIG_TOL = 1e-10
MAX_CONDITION = 1e12

# lqr_synthesis
LQR_MAX_ITER = 10_000
LQR_TOL = 1e-12

# inverse form bound
CAUCHY_SCHWARZ_TOL = 1e-10

RNG_NAME = "numpy.random.Philox4x64-10"


def rng_identifier() -> str:
    return f"{RNG_NAME} (numpy {np.__version__})"
