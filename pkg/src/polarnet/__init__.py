"""Polarization measurement over archived interaction-event streams.

Subpackages cover the pipeline stages: event ingestion, label annotation,
network construction, group detection, per-network metrics, and cross-topic
overlap/alignment analysis, tied together by a reproducible CLI runner.
"""

__version__ = "0.1.0"
