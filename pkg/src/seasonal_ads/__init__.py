"""Seasonal ad detection toolkit.

Detects whether an ad is tied to a seasonal event from its multimodal
content: keyword-based ground truth collection, human and model label
aggregation, a late-fused embedding classifier, keyword-removal
robustness evaluation, and calibration-ratio monitoring over delivery
streams.
"""

__version__ = "0.1.0"
