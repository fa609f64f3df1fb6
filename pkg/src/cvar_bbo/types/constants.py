# transformed outputs live in (-pi/2, pi/2)
T_MAX = 2.0
LAMBDA_MAX = 20.0
EPSILON = 1e-8

DEFAULT_ALPHA_STAR = 0.99
SUCCESS_PROBABILITY = 0.99
MAX_FAILURE_RATE = 0.01

DEFAULT_TAU = (0.8, 0.7, 0.6, 0.501)
DEFAULT_S0 = (0.01, 0.05, 0.001, 0.3)
DEFAULT_BETA1 = 0.05
DEFAULT_BETA2 = 1e-4
DEFAULT_BUDGET = 5000

BETA1_GRID = (0.001, 0.005, 0.01, 0.05, 0.1, 0.2)
NORM_BETA1 = 0.1
TUNE_SAMPLES = 1000
GAUSSIAN_S2_COEFF = 1e-3
TRUNCATED_S2_COEFF = 5e-4

MC_SAMPLES = 10_000
EPISTEMIC_GRID_RESOLUTION = 15

# standardized units
DEGENERATE_WIDTH = 1e-12
MIN_MASS = 1e-300

TRUNCATION_RETRIES = 100
