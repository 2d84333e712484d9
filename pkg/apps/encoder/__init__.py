# ============================================================================
# apps/encoder/__init__.py
# ============================================================================
