"""Contrastive explanations for plan-execution experiences.

Pipeline: experiences -> property extraction -> HDI typicality -> ontological
inference -> pairwise narratives -> chat-model refinement -> metric and
statistical evaluation.  See the CLI (``planexp``) and the HTTP service for
the operational surface.
"""

__version__ = "0.1.0"

from .kstore import ALWAYS, KnowledgeBase, Literal, Term, TimeInterval, Triple  # noqa: F401
from .narrative import Narrative, Specificity  # noqa: F401
from .typicality import HdiInterval, TypicalityLabel, empirical_hdi  # noqa: F401
