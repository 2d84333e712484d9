# ============================================================================
# apps/stylelab/__init__.py
# ============================================================================
