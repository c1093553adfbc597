import os
import logging
from dataclasses import dataclass

logger = logging.getLogger(__name__)

# recipes/ ships next to the package directory
BASE_DIR = os.path.dirname(os.path.abspath(__file__))
PROJECT_ROOT = os.path.dirname(BASE_DIR)


@dataclass(frozen=True)
class Settings:
    data_dir: str
    recipes_dir: str
    audit_log: str
    log_level: str
    threads: int

    @classmethod
    def from_env(cls) -> "Settings":
        """
        Reads EMBEDDING_FORGE_* variables, falling back to working-directory defaults.
        """
        threads_raw = os.getenv("EMBEDDING_FORGE_THREADS", "1")
        try:
            threads = max(1, int(threads_raw))
        except ValueError:
            logger.warning(f"Ignoring non-integer EMBEDDING_FORGE_THREADS={threads_raw!r}")
            threads = 1

        return cls(
            data_dir=os.getenv("EMBEDDING_FORGE_DATA_DIR", os.path.join(os.getcwd(), "data")),
            recipes_dir=os.getenv("EMBEDDING_FORGE_RECIPES_DIR", os.path.join(PROJECT_ROOT, "recipes")),
            audit_log=os.getenv("EMBEDDING_FORGE_AUDIT_LOG", os.path.join(os.getcwd(), "runs", "audit.log")),
            log_level=os.getenv("EMBEDDING_FORGE_LOG_LEVEL", "INFO").upper(),
            threads=threads,
        )
