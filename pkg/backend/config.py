"""
Simulator defaults
==================

Module-level defaults shared by the engine and the command-line front end.
Everything here can be overridden per invocation through CLI flags; nothing is
read from the environment.
"""

TOOL_VERSION = "1.0.0"

# --------------------
# Tolerances
# --------------------
ALGEBRA_TOL = 1e-12        # exact-algebra checks at dimension <= 4
IMPOSSIBLE_PROB = 1e-15    # projections below this are rejected as impossible
SIGMA_BOUND = 4.0          # statistical agreement, in combined standard errors

# --------------------
# Monte Carlo
# --------------------
DEFAULT_SEED = 20240601
DEFAULT_TRIALS = 10_000
MAX_SEED = 2**64 - 1
# Trials per RNG stream. Block k always draws from stream k, so results do not
# depend on how blocks are distributed over workers.
BLOCK_SIZE = 65_536

# --------------------
# Far-field optics (representative SPDC magnitudes)
# --------------------
DEFAULT_SLIT_SEPARATION = 1e-3   # m
DEFAULT_WAVELENGTH = 810e-9      # m
DEFAULT_SCREEN_SCALE = 0.1       # m, lens focal length of the f-f map
DEFAULT_FRINGE_POINTS = 1001
DEFAULT_FRINGE_PERIODS = 4

# Serialized angles (degrees) carry this many decimals
ANGLE_DECIMALS = 9
