"""Evaluation - Error metrics, comparison tables, benchmark protocol and charts."""
