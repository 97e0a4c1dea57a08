"""Personalized hierarchical browsing.

Models a user's interaction with a hierarchical information space as a
decision program over attribute-valued variables and personalizes it by
specializing the program against whatever partial information the user can
supply, whenever they supply it. Templates derived from explained interaction
traces pre-apply the parts the system already knows. A session service and a
thin CLI expose the engine.
"""

from .evaluate import (
    COMPLETE,
    EMPTY,
    PARTIAL,
    SpecializationResult,
    apply_sequence,
    click,
    partial_evaluate,
)
from .model import (
    Assignment,
    Attribute,
    Branch,
    Catalog,
    CatalogItem,
    Edge,
    InteractionProgram,
    Leaf,
    PathValuation,
    Schema,
    Variable,
    enumerate_paths,
    structurally_equal,
    validate_program,
)

__version__ = "0.1.0"

__all__ = [
    "Assignment",
    "Attribute",
    "Branch",
    "Catalog",
    "CatalogItem",
    "COMPLETE",
    "Edge",
    "EMPTY",
    "InteractionProgram",
    "Leaf",
    "PARTIAL",
    "PathValuation",
    "Schema",
    "SpecializationResult",
    "Variable",
    "apply_sequence",
    "click",
    "enumerate_paths",
    "partial_evaluate",
    "structurally_equal",
    "validate_program",
    "__version__",
]
