# ============================================================================
# apps/realizer/__init__.py
# ============================================================================
