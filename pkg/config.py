"""
Configuration for the Ising Spin-Chain Full Adder Simulator
All frequencies in units of J, all times in units of 1/J (hbar = 1, J = 1).
"""
import os
from dotenv import load_dotenv

# Load environment variables from .env file (real environment wins)
load_dotenv(".env", override=False)

# Spin chain physics
ISING_J = 1.0
OMEGA0 = float(os.getenv("ADDER_OMEGA0", "0.0"))  # only shifts every carrier uniformly
DELTA_OMEGA = float(os.getenv("ADDER_DELTA_OMEGA", "100.0"))
DEFAULT_K = int(os.getenv("ADDER_K", "100"))

# delta_omega must dominate J; below the warn level the 2*pi*K picture degrades
MIN_DELTA_OMEGA_RATIO = 10.0
WARN_DELTA_OMEGA_RATIO = 100.0

# Exact engine
EXACT_MAX_SPINS = int(os.getenv("ADDER_EXACT_MAX_SPINS", "13"))
EIG_CACHE_SIZE = int(os.getenv("ADDER_EIG_CACHE_SIZE", "64"))
NORM_TOLERANCE = 1e-10
DEGENERATE_AMPLITUDE = 1e-6

# Quantum map engine
XI_FACTOR = float(os.getenv("ADDER_XI_FACTOR", "0.001"))
TAIL_FACTOR = float(os.getenv("ADDER_TAIL_FACTOR", "0.1"))
DEFAULT_SEED = int(os.getenv("ADDER_SEED", "20040601"))
WORKERS = int(os.getenv("ADDER_WORKERS", "1"))
# "random" or "analytic" phases for new unwanted amplitudes
PHASE_MODEL = os.getenv("ADDER_PHASE_MODEL", "random")

# Output
OUTPUT_DIR = os.getenv("ADDER_OUTPUT_DIR", "results")
LOG_LEVEL = os.getenv("ADDER_LOG_LEVEL", "INFO")

VERSION = "1.0.0"

# Parameter sets of the published figures
FIGURE_DEFAULTS = {
    "fig1": {
        "mode": "exact",
        "K": 8,
        "delta_omega_over_omega": 1.0e4,
        "l": 5,
        "initial_numbers": [7, 12, 16, 27],
        "A": "sweep",
        "realizations": 1,
    },
    "fig2": {
        "mode": "compare",
        "K": 100,
        "delta_omega": 100.0,
        "l": 4,
        "initial_numbers": [2, 5, 11, 12],
        "A": 6,
        "realizations": 100,
        "phase_model": "analytic",
    },
    "fig3": {
        "mode": "map",
        "K": 100,
        "delta_omega": 100.0,
        "l": 1000,
        "M": 20,
        "A": "random",
        "realizations": 20,
    },
    "fig4": {
        "mode": "map",
        "K": 100,
        "delta_omega": 100.0,
        "l": 1000,
        "M": 20,
        "A": "random",
        "realizations": 100,
    },
}
