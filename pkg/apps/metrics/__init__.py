# ============================================================================
# apps/metrics - BLEU, ROUGE-L, selection F1 and plan-quality analysis
# ============================================================================
