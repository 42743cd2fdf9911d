"""fetril: feature-translation engine and benchmark harness for
exemplar-free class-incremental learning on precomputed embeddings."""

from .backend import kernels_backend

__version__ = "0.1.0"

__all__ = ["kernels_backend", "__version__"]
