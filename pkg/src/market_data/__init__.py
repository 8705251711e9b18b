"""Market Data - Quote models, CSV ingestion and in/out-of-sample splitting."""
