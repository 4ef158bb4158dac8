"""Default configuration, overwritten per environment
by specifying LEARNTRACK_SETTINGS env variable.
"""
import os

LOGGER_NAME = "learntrack"
LOG_LEVEL = "INFO"

# Points per axis of the tensor grid used for the power-function supremum.
GRID_PER_DIM = 101

# Points per axis of the grid written to surface.csv by reproduce-paper.
SURFACE_GRID_PER_DIM = 30

# Number of trailing steps treated as steady state in trace summaries.
STEADY_STATE_WINDOW = 50

# Thread pool size for variant/seed sweeps. 1 runs them inline.
SWEEP_WORKERS = 4

# Largest 2n solved by Kronecker vectorization; bigger systems go to scipy.
LYAPUNOV_KRONECKER_MAX_DIM = 20

DEBUG = False

def _load_from_config():
    g = globals()

    keys = [
        'LOG_LEVEL',
        'GRID_PER_DIM',
        'SURFACE_GRID_PER_DIM',
        'STEADY_STATE_WINDOW',
        'SWEEP_WORKERS',
    ]
    for k in keys:
        if k in os.environ:
            g[k] = os.environ[k]

    # numeric settings arrive as strings from the environment
    for k in ['GRID_PER_DIM', 'SURFACE_GRID_PER_DIM', 'STEADY_STATE_WINDOW', 'SWEEP_WORKERS']:
        if isinstance(g[k], str):
            g[k] = int(g[k])

_load_from_config()

if os.getenv("LEARNTRACK_TEST"):
    SWEEP_WORKERS = 1
