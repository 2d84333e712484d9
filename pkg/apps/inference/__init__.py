# ============================================================================
# apps/inference/__init__.py
# ============================================================================
