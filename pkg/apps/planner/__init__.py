# ============================================================================
# apps/planner/__init__.py
# ============================================================================
