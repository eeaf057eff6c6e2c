"""Abstract syntax of tagged lqCCS processes and expressions.

All nodes are frozen dataclasses, so structurally equal processes compare
and hash equal. Literal nodes double as runtime values: evaluating an
expression yields a :class:`BoolLit`, :class:`NatLit` or :class:`QubitLit`.
Keeping booleans and naturals in distinct classes avoids Python's
``True == 1`` coincidence leaking into action labels.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Union


# Expressions -----------------------------------------------------------------


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class BoolLit:
    value: bool


@dataclass(frozen=True)
class NatLit:
    value: int


@dataclass(frozen=True)
class QubitLit:
    name: str


@dataclass(frozen=True)
class Not:
    arg: "Expr"


@dataclass(frozen=True)
class Or:
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Le:
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Eq:
    left: "Expr"
    right: "Expr"


Value = Union[BoolLit, NatLit, QubitLit]
Expr = Union[Var, BoolLit, NatLit, QubitLit, Not, Or, Le, Eq]

TRUE = BoolLit(True)
FALSE = BoolLit(False)


# Prefix actions --------------------------------------------------------------


@dataclass(frozen=True)
class Tau:
    tag: str


@dataclass(frozen=True)
class TauPair:
    tag: str
    tag2: str


@dataclass(frozen=True)
class Recv:
    tag: str
    channel: str
    var: str


@dataclass(frozen=True)
class Send:
    tag: str
    channel: str
    expr: Expr


@dataclass(frozen=True)
class SopApply:
    tag: str
    op: str
    args: tuple


@dataclass(frozen=True)
class Meas:
    tag: str
    op: str
    args: tuple
    var: str


Prefixable = Union[Tau, TauPair, Recv, Send, SopApply, Meas]


# Processes -------------------------------------------------------------------


@dataclass(frozen=True)
class Nil:
    discard: tuple = ()


@dataclass(frozen=True)
class Prefix:
    action: Prefixable
    cont: "Process"


@dataclass(frozen=True)
class IfThenElse:
    cond: Expr
    then: "Process"
    orelse: "Process"


@dataclass(frozen=True)
class Sum:
    left: "Process"
    right: "Process"


@dataclass(frozen=True)
class Par:
    left: "Process"
    right: "Process"


@dataclass(frozen=True)
class Restrict:
    proc: "Process"
    channels: frozenset = field(default_factory=frozenset)


Process = Union[Nil, Prefix, IfThenElse, Sum, Par, Restrict]

Scheduler = Union[str, tuple]
"""A single tag ``"t"`` or an ordered pair ``("t", "t'")``."""


def sched_str(s: Scheduler) -> str:
    if isinstance(s, tuple):
        return f"({s[0]},{s[1]})"
    return s


# Channel declarations --------------------------------------------------------


@dataclass(frozen=True)
class ChanType:
    """Value type carried by a channel: ``qubit``, ``bool`` or ``nat(lo..hi)``."""

    kind: str
    lo: int = 0
    hi: int = 0

    @property
    def quantum(self) -> bool:
        return self.kind == "qubit"

    def classical_values(self) -> list:
        if self.kind == "bool":
            return [FALSE, TRUE]
        if self.kind == "nat":
            return [NatLit(v) for v in range(self.lo, self.hi + 1)]
        raise TypeError("qubit channels have no classical domain")

    def __str__(self):
        if self.kind == "nat":
            if (self.lo, self.hi) == (0, 1):
                return "bit"
            return f"nat({self.lo}..{self.hi})"
        return self.kind


QUBIT = ChanType("qubit")
BOOL = ChanType("bool")
BIT = ChanType("nat", 0, 1)


def nat_range(lo: int, hi: int) -> ChanType:
    if lo > hi:
        raise ValueError(f"empty nat range {lo}..{hi}")
    return ChanType("nat", lo, hi)


# Pretty printing -------------------------------------------------------------


def expr_str(e: Expr) -> str:
    if isinstance(e, Var):
        return e.name
    if isinstance(e, QubitLit):
        return e.name
    if isinstance(e, BoolLit):
        return "true" if e.value else "false"
    if isinstance(e, NatLit):
        return str(e.value)
    if isinstance(e, Not):
        return f"not {_expr_atom(e.arg)}"
    if isinstance(e, Or):
        return f"{_expr_atom(e.left)} or {_expr_atom(e.right)}"
    if isinstance(e, Le):
        return f"{_expr_atom(e.left)} <= {_expr_atom(e.right)}"
    if isinstance(e, Eq):
        return f"{_expr_atom(e.left)} = {_expr_atom(e.right)}"
    raise TypeError(f"not an expression: {e!r}")


def _expr_atom(e: Expr) -> str:
    if isinstance(e, (Var, QubitLit, BoolLit, NatLit)):
        return expr_str(e)
    return f"({expr_str(e)})"


def action_str(a: Prefixable) -> str:
    if isinstance(a, Tau):
        return f"{a.tag}:tau"
    if isinstance(a, TauPair):
        return f"({a.tag},{a.tag2}):tau"
    if isinstance(a, Recv):
        return f"{a.tag}:{a.channel}?{a.var}"
    if isinstance(a, Send):
        return f"{a.tag}:{a.channel}!{_expr_atom(a.expr)}"
    args = ", ".join(expr_str(x) for x in a.args)
    if isinstance(a, SopApply):
        return f"{a.tag}:{a.op}({args})"
    if isinstance(a, Meas):
        sep = " " if args else ""
        return f"{a.tag}:meas {a.op}({args}{sep}> {a.var})"
    raise TypeError(f"not an action: {a!r}")


def pretty(p: Process) -> str:
    """Render a process in the concrete syntax accepted by the parser."""
    if isinstance(p, Nil):
        return "nil[" + ", ".join(expr_str(e) for e in p.discard) + "]"
    if isinstance(p, Prefix):
        return f"{action_str(p.action)} . {_unary(p.cont)}"
    if isinstance(p, IfThenElse):
        then = p.then
        then_s = f"({pretty(then)})" if isinstance(then, (Sum, Par, IfThenElse)) else pretty(then)
        return f"if {expr_str(p.cond)} then {then_s} else {_unary(p.orelse)}"
    if isinstance(p, Sum):
        left = f"({pretty(p.left)})" if isinstance(p.left, Par) else pretty(p.left)
        return f"{left} + {_unary(p.right)}"
    if isinstance(p, Par):
        return f"{pretty(p.left)} || {_sum_level(p.right)}"
    if isinstance(p, Restrict):
        chans = ", ".join(sorted(p.channels))
        inner = pretty(p.proc) if isinstance(p.proc, Nil) else f"({pretty(p.proc)})"
        return f"{inner} \\ {{{chans}}}"
    raise TypeError(f"not a process: {p!r}")


def _unary(p: Process) -> str:
    return f"({pretty(p)})" if isinstance(p, (Sum, Par)) else pretty(p)


def _sum_level(p: Process) -> str:
    return f"({pretty(p)})" if isinstance(p, Par) else pretty(p)
