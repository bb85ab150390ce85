
import os
from pathlib import Path
from typing import Dict

from .exceptions import ConfigError

CACHE_DIR = Path(os.getenv("LGAE_CACHE_DIR", "~/.cache/lgae")).expanduser()
RUNS_DIR = Path(os.getenv("LGAE_RUNS_DIR", "runs"))
DATA_ROOT = Path(os.getenv("LGAE_DATA_ROOT", "data")).expanduser()

MAX_HOPS = int(os.getenv("LGAE_MAX_HOPS", "64"))
MAX_GCN_LAYERS = int(os.getenv("LGAE_MAX_GCN_LAYERS", "12"))
IDENTITY_BLOCK_COLS = int(os.getenv("LGAE_IDENTITY_BLOCK_COLS", "1024"))
LOSS_BLOCK_ROWS = int(os.getenv("LGAE_LOSS_BLOCK_ROWS", "2048"))

DEFAULT_K = 2
DEFAULT_EPOCHS = 200
LEARNING_RATE = 0.01
ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8
EVAL_EVERY = 10
VAL_FRAC = 0.05
TEST_FRAC = 0.10
DEFAULT_SEEDS = tuple(range(int(os.getenv("LGAE_DEFAULT_SEEDS", "10"))))
NEGATIVE_ATTEMPTS_PER_NODE = 1000

LOG_LEVEL = os.getenv("LGAE_LOG_LEVEL", "INFO").upper()
LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s %(message)s"

API_HOST = os.getenv("LGAE_API_HOST", "127.0.0.1")
API_PORT = int(os.getenv("LGAE_API_PORT", "8000"))
MAX_TRACKED_RUNS = int(os.getenv("LGAE_MAX_TRACKED_RUNS", "256"))


def read_key_values(path: Path) -> Dict[str, str]:
    """Parse a ``key=value`` file; blank lines and ``#`` comments are ignored."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"Cannot read config file {path}: {exc}") from exc
    values: Dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        if not sep or not key.strip():
            raise ConfigError(f"{path}:{lineno}: expected key=value, got {raw!r}")
        values[key.strip()] = value.strip()
    return values
