"""Tagged lqCCS syntax, the ``.lq`` parser and expression evaluation."""

from .parser import ParseError, Program, lookup_measurement, lookup_superop, parse, parse_process
from .syntax import pretty, sched_str
from .terms import EvalError, eval_expr, free_vars, size, subst_expr, substitute, tags_of

__all__ = [
    "EvalError",
    "ParseError",
    "Program",
    "eval_expr",
    "free_vars",
    "lookup_measurement",
    "lookup_superop",
    "parse",
    "parse_process",
    "pretty",
    "sched_str",
    "size",
    "subst_expr",
    "substitute",
    "tags_of",
]
