"""Exact policy mirror descent on finite discounted MDPs."""
from .mdp import Mdp, MdpError, load_mdp
from .geometry import ActionNorm, Regularizer, DomainError
from .policy_classes import Complete, ConvexHull, EpsGreedy, LogLinear, ClassError

__version__ = "0.1.0"

__all__ = ["Mdp", "MdpError", "load_mdp", "ActionNorm", "Regularizer", "DomainError",
           "Complete", "ConvexHull", "EpsGreedy", "LogLinear", "ClassError"]
