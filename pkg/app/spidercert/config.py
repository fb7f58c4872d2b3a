import os
from pathlib import Path

DATA_DIR = Path(os.getenv("DATA_DIR", "data"))
RESULTS_DIR = DATA_DIR / "results"

# Tolerances: relative for identities in alpha, absolute for quantities that should vanish.
REL_TOL = float(os.getenv("SPIDERCERT_TOL", "1e-9"))
ABS_TOL = float(os.getenv("SPIDERCERT_ABS_TOL", "1e-12"))

DENSE_EIG_MAX = int(os.getenv("SPIDERCERT_DENSE_EIG_MAX", "4096"))
DENSE_PSI_MAX = int(os.getenv("SPIDERCERT_DENSE_PSI_MAX", "4096"))
ENUM_MAX_BITS = float(os.getenv("SPIDERCERT_ENUM_MAX_BITS", "24"))

BRUTE_MAX_N = int(os.getenv("SPIDERCERT_BRUTE_MAX_N", "26"))
BRUTE_LOW_BITS = int(os.getenv("SPIDERCERT_BRUTE_LOW_BITS", "12"))

MAX_ELL = int(os.getenv("SPIDERCERT_MAX_ELL", "12"))
JOBS = int(os.getenv("SPIDERCERT_JOBS", "1"))
SAMPLE_CHUNK = int(os.getenv("SPIDERCERT_SAMPLE_CHUNK", "50000"))

LOG_LEVEL = os.getenv("SPIDERCERT_LOG_LEVEL", "INFO")
VERSION = "0.3.0"


def resolve_tol(tol=None) -> float:
    return REL_TOL if tol is None else float(tol)
