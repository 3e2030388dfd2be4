"""
Configuration settings for the sequence-space operator lab
"""
import logging
import os
import sys
from dotenv import load_dotenv

# Load environment variables
try:
    load_dotenv()
except Exception as e:
    print(f"Warning: Could not load .env file: {e}")
    print("Using default environment variables")

ENV_PREFIX = "HKLAB_"


class Config:
    # Helper method to get settings from the environment
    @staticmethod
    def get_setting(key: str, default: str = "") -> str:
        """Get setting from environment variable (HKLAB_ prefix) with a default"""
        return os.getenv(ENV_PREFIX + key, default)

    # Reproducibility
    SEED = int(get_setting("SEED", "0"))
    THREADS = int(get_setting("THREADS", "1"))

    # Norm estimation
    POWER_TOL = float(get_setting("POWER_TOL", "1e-10"))
    POWER_MAX_ITER = int(get_setting("POWER_MAX_ITER", "10000"))
    DENSE_SVD_MAX_N = int(get_setting("DENSE_SVD_MAX_N", "2048"))
    DENSE_FALLBACK_N = int(get_setting("DENSE_FALLBACK_N", "32"))

    # Spectrum and quadrature
    SPECTRUM_TOL = float(get_setting("SPECTRUM_TOL", "1e-14"))
    SIMPSON_TOL = float(get_setting("SIMPSON_TOL", "1e-8"))
    SIMPSON_MAX_DEPTH = int(get_setting("SIMPSON_MAX_DEPTH", "50"))
    TAIL_RTOL = float(get_setting("TAIL_RTOL", "1e-6"))

    # Difference calculus
    BINOM_MAX_K = int(get_setting("BINOM_MAX_K", "62"))
    RESOLVE_RTOL = float(get_setting("RESOLVE_RTOL", "1e-3"))

    # Experiment contracts
    SLOPE_MARGIN = float(get_setting("SLOPE_MARGIN", "0.1"))
    CONTRAST_RTOL = float(get_setting("CONTRAST_RTOL", "0.05"))

    # Application Configuration
    LOG_LEVEL = get_setting("LOG_LEVEL", "INFO")

    # File Paths
    DATA_DIR = get_setting("DATA_DIR", "data")
    SYMBOL_TABLE = os.path.join(DATA_DIR, "log_symbol.txt")
    GROUPING_FILE = os.path.join(DATA_DIR, "blocks_uniform3.txt")
    TRANSFORM_FILE = os.path.join(DATA_DIR, "identity_transform.txt")


_LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"


def configure_logging(level: str = None) -> None:
    """Install a single stderr handler on the root logger (idempotent)"""
    root = logging.getLogger()
    root.setLevel((level or Config.LOG_LEVEL).upper())
    if any(getattr(h, "_hklab", False) for h in root.handlers):
        return
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter(_LOG_FORMAT))
    handler._hklab = True
    root.addHandler(handler)
