"""Spatio-textual similarity search over regions of interest."""

from .filter import Engine, EngineConfig, search
from .model import AnswerSet, Corpus, Query, Region, STObject, TokenTable, brute_force_search

__all__ = [
    "AnswerSet",
    "Corpus",
    "Engine",
    "EngineConfig",
    "Query",
    "Region",
    "STObject",
    "TokenTable",
    "brute_force_search",
    "search",
]
