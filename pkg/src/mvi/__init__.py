"""Value iteration for multichain average-reward MDPs."""
from .mdp import Mdp, Policy, load, save, span, sup_dist, sup_norm, validate

__all__ = ["Mdp", "Policy", "load", "save", "span", "sup_dist", "sup_norm", "validate"]
__version__ = "0.1.0"
