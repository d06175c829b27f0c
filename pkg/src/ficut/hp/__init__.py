"""Hybrid-program core: syntax, parsing, evaluation, transforms and the grid oracle."""
from .ast import *  # noqa: F401,F403
from .evaluate import DomainError, UnsupportedConstruct, compile_term, eval_formula, eval_term
from .oracle import Grid, GridOracle, OracleError, TransitionRelation, enumerate_transitions
from .parser import (
    DuplicateError, Model, ParseError, SymbolTable, UndeclaredError, parse_formula,
    parse_model, parse_program, parse_term,
)
from .printer import pretty_print
from .transforms import cut_restrict, restrict
