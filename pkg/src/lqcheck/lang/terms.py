"""Expression evaluation, substitution and tag collection."""

from __future__ import annotations

from functools import lru_cache
from typing import Mapping

from .syntax import (
    BoolLit,
    Eq,
    Expr,
    IfThenElse,
    Le,
    Meas,
    NatLit,
    Nil,
    Not,
    Or,
    Par,
    Prefix,
    Process,
    QubitLit,
    Recv,
    Restrict,
    Send,
    SopApply,
    Sum,
    Tau,
    TauPair,
    Value,
    Var,
)


class EvalError(ValueError):
    """Unbound variable or ill-typed operand during evaluation."""


_LITERALS = (BoolLit, NatLit, QubitLit)


def eval_expr(e: Expr, bindings: Mapping[str, Value] | None = None) -> Value:
    """Evaluate ``e`` to a literal value.

    Equality on qubit names compares names only.
    """
    bindings = bindings or {}
    if isinstance(e, _LITERALS):
        return e
    if isinstance(e, Var):
        if e.name not in bindings:
            raise EvalError(f"unbound variable {e.name!r}")
        return bindings[e.name]
    if isinstance(e, Not):
        return BoolLit(not _as_bool(eval_expr(e.arg, bindings)))
    if isinstance(e, Or):
        left = _as_bool(eval_expr(e.left, bindings))
        right = _as_bool(eval_expr(e.right, bindings))
        return BoolLit(left or right)
    if isinstance(e, Le):
        left = eval_expr(e.left, bindings)
        right = eval_expr(e.right, bindings)
        if not (isinstance(left, NatLit) and isinstance(right, NatLit)):
            raise EvalError(f"<= expects naturals, got {left} and {right}")
        return BoolLit(left.value <= right.value)
    if isinstance(e, Eq):
        left = eval_expr(e.left, bindings)
        right = eval_expr(e.right, bindings)
        if type(left) is not type(right):
            raise EvalError(f"= compares values of different types: {left} and {right}")
        return BoolLit(left == right)
    raise EvalError(f"not an expression: {e!r}")


def _as_bool(v: Value) -> bool:
    if not isinstance(v, BoolLit):
        raise EvalError(f"expected a boolean, got {v}")
    return v.value


def subst_expr(e: Expr, x: str, v: Expr) -> Expr:
    if isinstance(e, Var):
        return v if e.name == x else e
    if isinstance(e, _LITERALS):
        return e
    if isinstance(e, Not):
        return Not(subst_expr(e.arg, x, v))
    if isinstance(e, (Or, Le, Eq)):
        return type(e)(subst_expr(e.left, x, v), subst_expr(e.right, x, v))
    raise EvalError(f"not an expression: {e!r}")


def substitute(p: Process, x: str, v: Expr) -> Process:
    """Replace free occurrences of variable ``x`` in ``p`` by ``v``.

    Values are closed, so no capture can occur; binders named ``x`` stop
    the substitution.
    """
    if isinstance(p, Nil):
        return Nil(tuple(subst_expr(e, x, v) for e in p.discard))
    if isinstance(p, Prefix):
        a = p.action
        if isinstance(a, (Tau, TauPair)):
            return Prefix(a, substitute(p.cont, x, v))
        if isinstance(a, Send):
            return Prefix(Send(a.tag, a.channel, subst_expr(a.expr, x, v)), substitute(p.cont, x, v))
        if isinstance(a, SopApply):
            args = tuple(subst_expr(e, x, v) for e in a.args)
            return Prefix(SopApply(a.tag, a.op, args), substitute(p.cont, x, v))
        if isinstance(a, Recv):
            return p if a.var == x else Prefix(a, substitute(p.cont, x, v))
        if isinstance(a, Meas):
            args = tuple(subst_expr(e, x, v) for e in a.args)
            cont = p.cont if a.var == x else substitute(p.cont, x, v)
            return Prefix(Meas(a.tag, a.op, args, a.var), cont)
    if isinstance(p, IfThenElse):
        return IfThenElse(subst_expr(p.cond, x, v), substitute(p.then, x, v), substitute(p.orelse, x, v))
    if isinstance(p, (Sum, Par)):
        return type(p)(substitute(p.left, x, v), substitute(p.right, x, v))
    if isinstance(p, Restrict):
        return Restrict(substitute(p.proc, x, v), p.channels)
    raise TypeError(f"not a process: {p!r}")


def free_vars_expr(e: Expr) -> set:
    if isinstance(e, Var):
        return {e.name}
    if isinstance(e, _LITERALS):
        return set()
    if isinstance(e, Not):
        return free_vars_expr(e.arg)
    return free_vars_expr(e.left) | free_vars_expr(e.right)


def free_vars(p: Process) -> set:
    """Variables occurring free in ``p``."""
    if isinstance(p, Nil):
        return set().union(*(free_vars_expr(e) for e in p.discard))
    if isinstance(p, Prefix):
        a = p.action
        inner = free_vars(p.cont)
        if isinstance(a, Recv):
            return inner - {a.var}
        if isinstance(a, Meas):
            return (inner - {a.var}).union(*(free_vars_expr(e) for e in a.args))
        if isinstance(a, Send):
            return inner | free_vars_expr(a.expr)
        if isinstance(a, SopApply):
            return inner.union(*(free_vars_expr(e) for e in a.args))
        return inner
    if isinstance(p, IfThenElse):
        return free_vars_expr(p.cond) | free_vars(p.then) | free_vars(p.orelse)
    if isinstance(p, (Sum, Par)):
        return free_vars(p.left) | free_vars(p.right)
    if isinstance(p, Restrict):
        return free_vars(p.proc)
    raise TypeError(f"not a process: {p!r}")


@lru_cache(maxsize=None)
def _tags(p: Process) -> frozenset:
    if isinstance(p, Nil):
        return frozenset()
    if isinstance(p, Prefix):
        a = p.action
        own = {a.tag, a.tag2} if isinstance(a, TauPair) else {a.tag}
        return frozenset(own) | _tags(p.cont)
    if isinstance(p, IfThenElse):
        return _tags(p.then) | _tags(p.orelse)
    if isinstance(p, (Sum, Par)):
        return _tags(p.left) | _tags(p.right)
    if isinstance(p, Restrict):
        return _tags(p.proc)
    raise TypeError(f"not a process: {p!r}")


def tags_of(obj) -> frozenset:
    """Tags occurring in a process, or in every process of a distribution.

    Distributions are anything with a ``processes()`` method.
    """
    if hasattr(obj, "processes"):
        return frozenset().union(*(_tags(p) for p in obj.processes()))
    return _tags(obj)


def size(p: Process) -> int:
    """Number of prefixes in ``p``; every transition strictly decreases it."""
    if isinstance(p, Nil):
        return 0
    if isinstance(p, Prefix):
        return 1 + size(p.cont)
    if isinstance(p, IfThenElse):
        return size(p.then) + size(p.orelse)
    if isinstance(p, (Sum, Par)):
        return size(p.left) + size(p.right)
    return size(p.proc)
