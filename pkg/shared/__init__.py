# ============================================================================
# shared/__init__.py - Shared utilities package
# ============================================================================
