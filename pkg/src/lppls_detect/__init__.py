"""Bubble detection via log-periodic power law singularity calibration.

Core pipeline: ingest prices (`series`), calibrate windows (`model`,
`calibration`, `cmaes`), filter fits (`filters`), aggregate confidence
indicators (`indicator`), escalate across timescales (`multilevel`), and
summarize empirical crashes (`crashes`). A FastAPI service (`service`) and a
thin CLI client (`cli`) expose the pipeline.
"""

__version__ = "0.1.0"
