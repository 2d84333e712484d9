# ============================================================================
# config.py - Environment defaults and training/decoding constants
# ============================================================================
import os
from dotenv import load_dotenv

# Load environment variables from .env file
load_dotenv()

# Application settings
APP_NAME = "plangen"
APP_VERSION = "0.4.0"
APP_DESCRIPTION = "Sentence-level content planning and style-controlled text generation"

# Logging
LOG_LEVEL = os.getenv("LOG_LEVEL", "info")
LOG_DIR = os.getenv("LOG_DIR", "logs")

# Run settings
DEFAULT_SEED = int(os.getenv("PLANGEN_SEED", 13))
DEFAULT_WORKERS = int(os.getenv("PLANGEN_WORKERS", 1))
DEFAULT_TASK = os.getenv("PLANGEN_TASK", "argument")

# Model sizes
HIDDEN_SIZE = 512
EMBED_SIZE = 300
NUM_LAYERS = 2
DROPOUT = 0.2
INIT_SCALE = 0.1
FORGET_BIAS = 1.0

# Optimisation
LEARNING_RATE = 0.15
ACCUMULATOR_INIT = 0.1
CLIP_NORM = 2.0
BATCH_SIZE = 64
GAMMA = 1.0
ETA = 1.0
MAX_EPOCHS = 20

# Data limits
VOCAB_SIZE = 50000
BANK_CAPS = {"argument": 70, "wikipedia": 30, "abstract": 30}
STYLE_ARITY = {"argument": 3, "wikipedia": 4, "abstract": 1}
MAX_TOPIC_TOKENS = 500
MAX_PASSAGE_TOKENS = 400
MAX_KEYPHRASE_TOKENS = 10

# Decoding
BEAM_SIZE = 5
MAX_SENTENCES = 10
SELECTION_THRESHOLD = 0.5
MAX_SENTENCE_TOKENS = 40

# Numerics
EXP_CLAMP = 40.0
LOG_EPS = 1e-12
