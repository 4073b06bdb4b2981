import os
import pathlib
import logging
from dotenv import load_dotenv
from rich.logging import RichHandler

load_dotenv()

# === Setup ===
BASE_DIR = pathlib.Path(__file__).resolve().parents[1]

SPEC_DIR = os.getenv("MSIM_SPEC_DIR", str(BASE_DIR / "specs"))
RESULTS_DIR = os.getenv("MSIM_RESULTS_DIR", str(BASE_DIR / "data" / "results"))

# ---------------- Simulation defaults (env-overridable) ----------------
DEFAULT_SEED       = int(os.getenv("MSIM_SEED", "20250817"))
DEFAULT_BLOCK_LEN  = int(os.getenv("MSIM_BLOCK_LEN", "1000"))
DEFAULT_BLOCKS     = int(os.getenv("MSIM_BLOCKS", "10000"))
DEFAULT_SCHEME_B_K = int(os.getenv("MSIM_SCHEME_B_K", "8"))
WORKERS            = int(os.getenv("MSIM_WORKERS", "1"))
BATCH_SYMBOLS      = int(os.getenv("MSIM_BATCH_SYMBOLS", "262144"))

# ---------------- Quadrature ----------------
QUAD_ABS_TOL = float(os.getenv("MSIM_QUAD_ABS_TOL", "1e-12"))
QUAD_LIMIT   = int(os.getenv("MSIM_QUAD_LIMIT", "400"))

# ---------------- Waveform oracle ----------------
MIN_OVERSAMPLING = 16

LOG_LEVEL = os.getenv("MSIM_LOG_LEVEL", "INFO")


def setup_logging(level: str = LOG_LEVEL) -> None:
    """Route log records through rich; safe to call more than once"""
    root = logging.getLogger()
    if any(isinstance(h, RichHandler) for h in root.handlers):
        root.setLevel(level.upper())
        return
    logging.basicConfig(
        level=level.upper(),
        format="%(message)s",
        datefmt="[%X]",
        handlers=[RichHandler(rich_tracebacks=True, show_path=False)],
    )
