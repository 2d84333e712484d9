# ============================================================================
# apps/training/__init__.py
# ============================================================================
