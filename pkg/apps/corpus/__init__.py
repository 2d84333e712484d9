# ============================================================================
# apps/corpus/__init__.py
# ============================================================================
