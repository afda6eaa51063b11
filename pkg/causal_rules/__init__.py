"""
Causal rule mining.

Learns interpretable causal rules (conjunctions of covariate conditions paired with
an IPW-estimated treatment effect) from observational tabular data.
"""

__version__ = "0.1.0"
TOOL_NAME = "causal-rules"
