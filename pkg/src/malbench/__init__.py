"""Benchmarking pipeline for static PE malware detectors.

Stages: ingest raw JSONL -> vectorize to fixed-layout fragments ->
sample train/test datasets -> train classifiers -> evaluate ->
analyze result tables. Every stage is deterministic given its seeds.
"""

__version__ = "0.1.0"
