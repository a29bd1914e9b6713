"""Reference embedding provider speaking the pipeline's /v1/embed protocol.

Deterministic mode maps content through a seeded hash to unit-norm
vectors, so pipelines run end to end with no model downloads; encoder
mode wraps an off-the-shelf sentence-transformers encoder for real runs.
"""

from .config import AdapterConfig
from .vectors import deterministic_vector

__version__ = "0.1.0"

__all__ = ["AdapterConfig", "deterministic_vector", "__version__"]
