"""Video-conditioned text head over precomputed embedding bundles."""

__version__ = "0.1.0"

from vctext import dataio, evalharness, head, numerics, semantics  # noqa: F401

__all__ = ["dataio", "evalharness", "head", "numerics", "semantics", "__version__"]
