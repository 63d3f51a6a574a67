from decouple import config

# Time stepping
CFL_SAFETY = config("CFL_SAFETY", cast=float, default=0.4)
HYPERBOLICITY_MARGIN = config("HYPERBOLICITY_MARGIN", cast=float, default=0.05)
BLOWUP_FACTOR = config("BLOWUP_FACTOR", cast=float, default=1e6)

# Grid
COLLAR_OFFSET = config("COLLAR_OFFSET", cast=float, default=0.25)  # eta: r_min = 1 + eta
OUTER_PADDING_CELLS = config("OUTER_PADDING_CELLS", cast=int, default=10)

# Decay exponents for the bootstrap norms
DECAY_DELTA = config("DECAY_DELTA", cast=float, default=0.1)
DECAY_DELTA1 = config("DECAY_DELTA1", cast=float, default=0.25)

# Existence window
EXISTENCE_C1 = config("EXISTENCE_C1", cast=float, default=5.0)
KAPPA_ORDER = config("KAPPA_ORDER", cast=int, default=10)

# Diagnostics
SUPPORT_REL_THRESHOLD = config("SUPPORT_REL_THRESHOLD", cast=float, default=1e-9)
# Collar contact sits above the ~1e-9 precursor the stencils leave ahead of the light cone
COLLAR_REL_THRESHOLD = config("COLLAR_REL_THRESHOLD", cast=float, default=1e-6)
TIME_STENCIL_STEP = config("TIME_STENCIL_STEP", cast=float, default=0.1)
RECORD_EVERY = config("RECORD_EVERY", cast=int, default=25)
RECORD_ORDER = config("RECORD_ORDER", cast=int, default=2)
BOOTSTRAP_ORDER = config("BOOTSTRAP_ORDER", cast=int, default=6)
NULLFORM_TOLERANCE = config("NULLFORM_TOLERANCE", cast=float, default=1e-12)

# Stencil capability: pure spatial derivatives by repeated centered differences
MAX_DERIVATIVE_ORDER = 6

# Cylindrical mode
CYL_PSI_FLOOR = config("CYL_PSI_FLOOR", cast=float, default=0.05)

# Runtime
OUTPUT_DIR = config("OUTPUT_DIR", default="runs")
LOG_FILE = config("LOG_FILE", default="catenoid_lab.log")
LOG_LEVEL = config("LOG_LEVEL", default="INFO")
DEFAULT_THREADS = config("DEFAULT_THREADS", cast=int, default=1)
GLOBAL_SEED = config("GLOBAL_SEED", cast=int, default=20240611)
