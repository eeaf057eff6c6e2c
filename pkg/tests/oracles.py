"""Independent reference implementations used by the tests.

None of these reuse the package's padding, partial trace or quantum
distribution code: padding is built entry by entry from bit strings, the
partial trace is a plain loop, and the bisimulation oracle runs on the
configuration semantics, computing environments straight from the
weighted configurations.
"""

from __future__ import annotations

import itertools

import numpy as np

from lqcheck import qmath
from lqcheck.lang import parse
from lqcheck.lang.syntax import (
    IfThenElse,
    Meas,
    NatLit,
    Nil,
    Par,
    Prefix,
    QubitLit,
    Send,
    SopApply,
    Sum,
    Tau,
    Var,
    Eq,
)
from lqcheck.plts import EMPTY, ProbDist, System, enabled, scheduled_step
from lqcheck.typesys import typecheck

EPS = 1e-9


def bits(index: int, n: int) -> list:
    return [(index >> (n - 1 - k)) & 1 for k in range(n)]


def brute_pad(op: np.ndarray, positions, total: int) -> np.ndarray:
    """Register-wide operator with ``op`` on ``positions``, identity elsewhere."""
    dim = 2**total
    k = len(positions)
    out = np.zeros((dim, dim), dtype=complex)
    for row in range(dim):
        rb = bits(row, total)
        for col in range(dim):
            cb = bits(col, total)
            if any(rb[q] != cb[q] for q in range(total) if q not in positions):
                continue
            sub_r = int("".join(str(rb[p]) for p in positions), 2) if k else 0
            sub_c = int("".join(str(cb[p]) for p in positions), 2) if k else 0
            out[row, col] = op[sub_r, sub_c]
    return out


def loop_partial_trace(rho: np.ndarray, drop, total: int) -> np.ndarray:
    """Trace out ``drop`` by summing matching basis entries."""
    keep = [q for q in range(total) if q not in drop]
    dim_k = 2 ** len(keep)
    out = np.zeros((dim_k, dim_k), dtype=complex)
    for row in range(2**total):
        rb = bits(row, total)
        for col in range(2**total):
            cb = bits(col, total)
            if any(rb[q] != cb[q] for q in drop):
                continue
            r = int("".join(str(rb[q]) for q in keep), 2) if keep else 0
            c = int("".join(str(cb[q]) for q in keep), 2) if keep else 0
            out[r, c] += rho[row, col]
    return out


# Bisimulation on the configuration semantics -----------------------------------


def direct_env(dist: ProbDist, system: System):
    """Environment of a configuration distribution, without merging first."""
    if dist.is_empty():
        return None
    owned = typecheck(dist.processes()[0], system.channels)
    drop = [i for i, q in enumerate(system.qubits) if q in owned]
    n = len(system.qubits)
    return sum(w * loop_partial_trace(rho, drop, n) for w, rho, _ in dist.entries)


def plts_bisim(d: ProbDist, t: ProbDist, system: System) -> bool:
    """Lock-step exploration of scheduled configuration semantics."""
    memo: dict = {}

    def owned(dist):
        sigmas = {typecheck(p, system.channels) for p in dist.processes()}
        assert len(sigmas) == 1
        return sigmas.pop()

    def rec(a: ProbDist, b: ProbDist) -> bool:
        key = (a.key(), b.key())
        if key in memo:
            return memo[key]
        if a.is_empty() or b.is_empty():
            other = b if a.is_empty() else a
            result = other.mass() <= EPS
        elif owned(a) != owned(b):
            result = False
        elif np.max(np.abs(direct_env(a, system) - direct_env(b, system))) > EPS:
            result = False
        else:
            alphabet = set(enabled(a, system)) | set(enabled(b, system))
            result = all(
                rec(scheduled_step(a, s, mu, system), scheduled_step(b, s, mu, system))
                for s, mu in sorted(alphabet, key=str)
            )
        memo[key] = result
        return result

    return rec(d, t)


# Random input-restricted processes ---------------------------------------------

RANDOM_HEADER = """
channel c : bit
channel k : qubit
qubits q0 q1
"""

GATES_1 = ["H", "X", "Z", "SH", "I"]
MEAS_1 = ["M01", "Mpm", "Mpmi"]


class ProcGen:
    """Random deterministic processes without quantum inputs.

    Every action gets a fresh tag, so choices and parallel components never
    share a scheduler.
    """

    def __init__(self, rng: np.random.Generator):
        self.rng = rng
        self.tags = itertools.count()
        self.vars = itertools.count()

    def tag(self) -> str:
        return f"t{next(self.tags)}"

    def gen(self, depth: int, owned: list, scope: list) -> object:
        if depth == 0:
            return Nil(tuple(QubitLit(q) for q in owned))
        kind = self.rng.choice(["sop", "meas", "send", "qsend", "sum", "par", "cnot"])
        if kind in ("sop", "meas", "qsend") and not owned:
            kind = "send"
        if kind == "cnot" and len(owned) < 2:
            kind = "sop" if owned else "send"
        if kind == "par" and len(owned) < 1:
            kind = "sum"
        if kind == "sop":
            q = self.rng.choice(owned)
            gate = self.rng.choice(GATES_1)
            return Prefix(SopApply(self.tag(), gate, (QubitLit(q),)), self.gen(depth - 1, owned, scope))
        if kind == "cnot":
            a, b = self.rng.permutation(owned)[:2]
            return Prefix(
                SopApply(self.tag(), "CNOT", (QubitLit(a), QubitLit(b))), self.gen(depth - 1, owned, scope)
            )
        if kind == "meas":
            q = self.rng.choice(owned)
            var = f"x{next(self.vars)}"
            op = self.rng.choice(MEAS_1)
            if self.rng.random() < 0.5:
                cont = IfThenElse(
                    Eq(Var(var), NatLit(0)),
                    self.gen(depth - 1, owned, scope + [var]),
                    self.gen(depth - 1, owned, scope + [var]),
                )
            else:
                cont = self.gen(depth - 1, owned, scope + [var])
            return Prefix(Meas(self.tag(), op, (QubitLit(q),), var), cont)
        if kind == "send":
            if scope and self.rng.random() < 0.6:
                value = Var(str(self.rng.choice(scope)))
            else:
                value = NatLit(int(self.rng.integers(2)))
            return Prefix(Send(self.tag(), "c", value), self.gen(depth - 1, owned, scope))
        if kind == "qsend":
            q = self.rng.choice(owned)
            rest = [x for x in owned if x != q]
            return Prefix(Send(self.tag(), "k", QubitLit(q)), self.gen(depth - 1, rest, scope))
        if kind == "sum":
            return Sum(
                Prefix(Tau(self.tag()), self.gen(depth - 1, owned, scope)),
                Prefix(Tau(self.tag()), self.gen(depth - 1, owned, scope)),
            )
        split = int(self.rng.integers(len(owned) + 1))
        return Par(self.gen(depth - 1, owned[:split], scope), self.gen(depth - 1, owned[split:], scope))


_SWAPS = {"H": "SH", "SH": "H", "X": "Z", "Z": "X", "I": "Z", "M01": "Mpm", "Mpm": "Mpmi", "Mpmi": "M01"}


def mutate(p, rng: np.random.Generator):
    """Change one gate, measurement or sent literal, chosen uniformly."""
    sites = []

    def collect(node, path):
        if isinstance(node, Prefix):
            a = node.action
            if isinstance(a, (SopApply, Meas)) and a.op in _SWAPS:
                sites.append(path)
            if isinstance(a, Send) and isinstance(a.expr, NatLit):
                sites.append(path)
            collect(node.cont, path + ("cont",))
        elif isinstance(node, IfThenElse):
            collect(node.then, path + ("then",))
            collect(node.orelse, path + ("orelse",))
        elif isinstance(node, (Sum, Par)):
            collect(node.left, path + ("left",))
            collect(node.right, path + ("right",))

    collect(p, ())
    if not sites:
        return p
    target = sites[int(rng.integers(len(sites)))]

    def rebuild(node, path):
        if not path:
            a = node.action
            if isinstance(a, SopApply):
                a = SopApply(a.tag, _SWAPS[a.op], a.args)
            elif isinstance(a, Meas):
                a = Meas(a.tag, _SWAPS[a.op], a.args, a.var)
            else:
                a = Send(a.tag, a.channel, NatLit(1 - a.expr.value))
            return Prefix(a, node.cont)
        head, rest = path[0], path[1:]
        if isinstance(node, Prefix):
            return Prefix(node.action, rebuild(node.cont, rest))
        if isinstance(node, IfThenElse):
            if head == "then":
                return IfThenElse(node.cond, rebuild(node.then, rest), node.orelse)
            return IfThenElse(node.cond, node.then, rebuild(node.orelse, rest))
        if head == "left":
            return type(node)(rebuild(node.left, rest), node.right)
        return type(node)(node.left, rebuild(node.right, rest))

    return rebuild(p, target)


def random_system() -> tuple:
    prog = parse(RANDOM_HEADER + "proc Main = nil[q0, q1]\n")
    return prog, System.from_program(prog)


def random_pair(seed: int) -> tuple:
    """A random Proc_g pair with matched tags, plus two ensembles of one state.

    Returns ``(P, Q, ensemble_a, ensemble_b)``. Half the pairs are a
    process against itself (run on different ensembles), the other half
    against a one-site mutation.
    """
    rng = np.random.default_rng(seed)
    owned = ["q0", "q1"] if rng.random() < 0.5 else ["q0"]
    depth = int(rng.integers(2, 5))
    p = ProcGen(rng).gen(depth, owned, [])
    q = mutate(p, rng) if rng.random() < 0.5 else p
    ens_a, ens_b = two_ensembles(rng)
    return p, q, ens_a, ens_b


def two_ensembles(rng: np.random.Generator) -> tuple:
    """Two different pure-state ensembles with the same rank-two average."""
    rho = qmath.random_density(2, rng, rank=2)
    vals, vecs = np.linalg.eigh(rho)
    weighted = [np.sqrt(v) * vecs[:, i] for i, v in enumerate(vals) if v > 1e-12]
    mix = qmath.random_unitary(1, rng)
    rotated = [sum(mix[j, i] * weighted[i] for i in range(2)) for j in range(2)]

    def ensemble(vectors):
        out = []
        for vec in vectors:
            w = float(np.vdot(vec, vec).real)
            out.append((w, qmath.outer(vec / np.sqrt(w))))
        return out

    return ensemble(weighted), ensemble(rotated)


def ensemble_dist(ensemble, p) -> ProbDist:
    return ProbDist.ensemble(ensemble, p) if ensemble else EMPTY
