"""Document-level MT refinement laboratory.

Translate at one granularity, iteratively refine at another under five
prompting strategies, judge with a severity-weighted length-normalized
MQM protocol, and probe refiner behavior (edit ratios, confidence AUC,
likelihood deltas, error overlap, human preference aggregation).
"""

__version__ = "0.1.0"
