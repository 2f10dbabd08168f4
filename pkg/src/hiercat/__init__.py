"""Entity embeddings and top-down reduction of hierarchical categorical variables."""
from .hierarchy import Hierarchy, NodeId

__version__ = "0.1.0"
__all__ = ["Hierarchy", "NodeId", "__version__"]
