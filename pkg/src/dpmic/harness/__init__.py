"""Experiment harness: data ingestion, tuned parameters, sweeps and fuzzing."""
