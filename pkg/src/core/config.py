# Configuration constants for the distdiff toolkit

TOOL_NAME = 'distdiff'
TOOL_VERSION = '1.0.0'

# Linear algebra tolerances
SYMMETRY_TOL = 1e-12 # max |M - M^T| (relative to max(1, |M|)) accepted as symmetric
JACOBI_TOL = 1e-12 # off-diagonal Frobenius norm relative to ||M||_F
JACOBI_MAX_SWEEPS = 100
JACOBI_THRESHOLD_SWEEPS = 3 # sweeps that skip rotations below the threshold
SPD_RESIDUAL_TOL = 1e-9

# Power iteration on H^-1 B (spectral-radius mode for L~)
POWER_ITER_MAX = 10000
POWER_ITER_TOL = 1e-12
POWER_ITER_SEED = 7

# Graph / spectra checks
LEADER_REACH_TOL = 1e-9 # max |H^-1 B 1 - 1|
L_TILDE_MODES = ('singular', 'spectral_radius', 'explicit')
DEFAULT_L_TILDE_MODE = 'singular'

# Gain design
GAIN_RECURSION_TOL = 1e-12
GAIN_CONFORMANCE_REL_TOL = 5e-3 # printed gains carry ~3 significant digits

# Gain verification (m = 1 Lyapunov conditions)
ETA0_TOL = 1e-8 # below this eta0 counts as zero; gamma0 < 0 is checked instead
DEFAULT_H_SAFETY = 1.1
DEFAULT_SPHERE_SAMPLES = 2000
DEFAULT_SPHERE_SEED = 0
REFINE_BEST_POINTS = 10
REFINE_ITERATIONS = 50
REFINE_INITIAL_STEP = 0.1

# Simulation defaults
DEFAULT_T_FINAL = 60.0 # not stated for the reference experiments; covers several periods of omega = 0.5
DEFAULT_SUBSTEPS = 100 # forward-Euler substeps per sampling interval in continuous emulation
DEFAULT_INIT_RANGE = (-5.0, 5.0)
DEFAULT_INIT_SEED = 0
BLOWUP_BOUND = 1e12
RECORD_CHUNK_STEPS = 512 # steps buffered between blow-up checks and error bookkeeping

# Metrics
DEFAULT_TAIL_FRACTION = 0.2
DEFAULT_THRESHOLD_FACTOR = 10.0 # convergence threshold = factor * dt**(m - mu + 1)
MIN_SWEEP_VALUES = 3

# Output formats
FLOAT_FORMAT = '%.17g'
TRAJECTORY_COLUMNS = ['t', 'agent', 'mu', 'x', 'ref', 'err']
SWEEP_COLUMNS = ['param', 'value', 'mu', 'steady_state_err']
TRAJECTORY_FILE = 'trajectory.csv'
METRICS_FILE = 'metrics.json'
GAINS_FILE = 'gains.json'
SWEEP_FILE = 'sweep.csv'
SCALING_FILE = 'scaling.json'
VERIFY_FILE = 'verify_gains.json'

# CLI exit codes
EXIT_OK = 0
EXIT_SELFTEST_FAILED = 1
EXIT_CONFIG_ERROR = 2
EXIT_VALIDATION_ERROR = 3
EXIT_BLOWUP = 4
EXIT_VERIFY_FAILED = 5
