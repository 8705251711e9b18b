"""Observability - Structured logging and Prometheus metrics."""
