# ============================================================================
# apps/__init__.py - Application packages
# ============================================================================
# Each app keeps schemas, services and its click command module; main.py
# registers the commands.
