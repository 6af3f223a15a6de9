import os
import logging
from pathlib import Path
from dotenv import load_dotenv

# Load environment variables
load_dotenv()

# Base directory
BASE_DIR = Path(__file__).resolve().parent.parent

# Environment
ENV = os.getenv("FLASK_ENV", "development")
DEBUG = os.getenv("FLASK_DEBUG", "False").lower() == "true"

# Results database
DATABASE_URL = os.getenv("DATABASE_URL", f"sqlite:///{BASE_DIR / 'sweeps.db'}")

# API Configuration
API_HOST = os.getenv("API_HOST", "0.0.0.0")
API_PORT = int(os.getenv("API_PORT", 5000))

# Home solver
TEMP_GRID = float(os.getenv("TEMP_GRID", 0.25))  # °C between DP temperature states
TEMP_CEILING = float(os.getenv("TEMP_CEILING", 40.0))  # °C, top of the DP grid
HEAT_VITAL_FLOOR = float(os.getenv("HEAT_VITAL_FLOOR", 0.0))  # °C where heating vital utility starts
SCALARIZATION_WEIGHT = float(os.getenv("SCALARIZATION_WEIGHT", 1000.0))  # W_v
SOLVER_CACHE_SIZE = int(os.getenv("SOLVER_CACHE_SIZE", 4096))

# Sub-Greedient defaults (manually tuned values for the reference scenarios)
SG_KMAX = int(os.getenv("SG_KMAX", 100))
SG_A1 = float(os.getenv("SG_A1", 1.2e6))
SG_A2 = float(os.getenv("SG_A2", 6000.0))

# Exhaustive oracles
ORACLE_MAX_SCHEDULES = int(float(os.getenv("ORACLE_MAX_SCHEDULES", 1e8)))
GM_MAX_COMBINATIONS = int(float(os.getenv("GM_MAX_COMBINATIONS", 1e6)))

# Experiments
MAX_WORKERS = int(os.getenv("MAX_WORKERS", 4))
SWEEP_POINTS = int(os.getenv("SWEEP_POINTS", 20))

# Logging Configuration
LOG_LEVEL = os.getenv("LOG_LEVEL", "INFO")
LOG_FILE = os.getenv("LOG_FILE", "logs/app.log")

# Create logs directory if it doesn't exist
LOG_DIR = BASE_DIR / "logs"
LOG_DIR.mkdir(exist_ok=True)

# Configure logging
logging.basicConfig(
    level=getattr(logging, LOG_LEVEL),
    format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
    handlers=[
        logging.FileHandler(BASE_DIR / LOG_FILE),
        logging.StreamHandler()
    ]
)
