"""calcheck: a checker for Dijkstra-style calculational proofs.

The pipeline: parse a .cpc document, validate each proof semantically with
an equational/propositional/arithmetic backend, and replay every accepted
proof through a small independent kernel before calling it valid.
"""

from .terms import App, Const, Subst, Term, Var, apply_subst, match, render
from .environment import Environment, base_environment
from .parser import parse_document, parse_term

__all__ = [
    "App",
    "Const",
    "Subst",
    "Term",
    "Var",
    "apply_subst",
    "match",
    "render",
    "Environment",
    "base_environment",
    "parse_document",
    "parse_term",
]

__version__ = "0.1.0"
