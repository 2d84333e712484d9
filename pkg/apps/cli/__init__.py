# ============================================================================
# apps/cli/__init__.py
# ============================================================================

from .schemas import RunConfig
from .services import load_config

__all__ = ["RunConfig", "load_config"]
