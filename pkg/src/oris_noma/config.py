import math
import os

from dotenv import load_dotenv

load_dotenv()

# Mellin-Barnes quadrature
MB_NODES = 2001
MB_HALF_HEIGHT = 60.0
MB_MAX_HALF_HEIGHT = 960.0
MB_TOL = 1e-12
MB_IMAG_RTOL = 1e-10
SHAPE_PERTURBATION = 1e-6  # applied to beta when alpha - beta is (nearly) an integer

# E2E series
SERIES_TERMS = 10
SERIES_MAX_TERMS = 160
SERIES_GAP_WARN = 1e-6
NEGATIVE_CLAMP_WARN = -1e-8
LOG_SERIES_TERMS = 10
LOG_SERIES_RATIO_WARN = 0.1
ASYMPTOTIC_DEGENERATE_GAP = 1e-6

# Quadrature oracles
ORACLE_EPSREL = 1e-10
ORACLE_LIMIT = 400
TURBULENCE_TAIL_EXTENT = 160000.0  # alpha beta h_s where 2 sqrt(alpha beta h_s) = 800

# NOMA guard a1/a2 > gth1, relative slack
GUARD_RTOL = 1e-12

# Monte Carlo
MC_SHARD_SIZE = 1 << 18
MC_TRIALS = 1_000_000
DEFAULT_SEED = 20240601
THREADS = int(os.getenv('ORIS_NOMA_THREADS', os.cpu_count() or 1))

# Cn2 range quoted for terrestrial links [m^-2/3]
CN2_MIN = 1e-17
CN2_MAX = 1e-13

# Parameters of the reference two-receiver deployment
WAVELENGTH = 1550e-9
SIGMA_ATM = 0.43e-3  # attenuation coefficient [1/m]
RHO = 0.8
LENS_LENGTH = 0.05
D_Z1 = 1000.0
D_Z2 = 800.0
D_TO = 400.0  # Tx->ORIS share of both paths
PHI_P = (math.pi / 3, math.pi / 3)
PHI_R = (math.pi / 6, math.pi / 4)
A1, A2 = 0.9, 0.1
B1, B2 = 0.4, 0.6
R1, R2 = 2.0, 4.5
BEAM_WIDTH = (0.0045, 0.0035)
SWAY_SIGMA = 0.375 * LENS_LENGTH
CN2 = 5e-14
BEAM_WAIST = 1e-3
