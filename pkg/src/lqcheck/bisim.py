"""Ground bisimulation checking, superoperator probes and context replay.

``ground_bisim`` explores pairs of quantum distributions in lock step. A
pair is accepted when both sides own the same qubits, show the same
environment to an observer, and every scheduler/action pair enabled on
either side leads to an accepted pair. A move available on one side only
steps the other side to the empty distribution, so it is caught as an
environment mismatch one level down. Processes have no recursion, so the
reachable pair space is a finite DAG and plain memoisation suffices.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import qmath
from .lang.syntax import Par, Process, sched_str
from .lang.terms import tags_of
from .plts import (
    EMPTY,
    Action,
    ProbDist,
    SemanticsError,
    System,
    enabled,
    scheduled_step,
    sort_key,
    unscheduled_successors,
)
from .qlts import QuantumDist, apply_env_superop, enabled_q, env, qdist_step
from .typesys import TypingError, type_distribution, typecheck, uic

BASIS_PROC_G = "input-restricted processes: ground bisimilarity is fully abstract"
BASIS_GROUND_ONLY = "ground-only: some process has an unrestricted quantum input"


@dataclass
class Verdict:
    """Outcome of an equivalence check.

    ``witness`` lists the ``(scheduler, action)`` steps leading from the
    inputs to the mismatching pair described by ``mismatch``.
    """

    equivalent: bool
    theorem_basis: str = BASIS_PROC_G
    witness: list = field(default_factory=list)
    mismatch: dict | None = None
    warnings: list = field(default_factory=list)
    notes: list = field(default_factory=list)
    stats: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        env_mismatch = None
        if self.mismatch is not None:
            env_mismatch = {
                "kind": self.mismatch["kind"],
                "left": _jsonable(self.mismatch.get("left")),
                "right": _jsonable(self.mismatch.get("right")),
                "max_abs_diff": _num(self.mismatch.get("max_abs_diff", 0.0)),
            }
            if "detail" in self.mismatch:
                env_mismatch["detail"] = self.mismatch["detail"]
        return {
            "equivalent": self.equivalent,
            "theorem_basis": self.theorem_basis,
            "witness": [{"scheduler": sched_str(s), "action": str(a)} for s, a in self.witness],
            "env_mismatch": env_mismatch,
            "warnings": list(self.warnings),
            "notes": list(self.notes),
            "stats": dict(self.stats),
        }


def _num(x: float) -> float:
    return float(f"{float(x):.12g}")


def _jsonable(m):
    """Matrices become ``{"re": ..., "im": ...}``; scalars stay numbers."""
    if m is None:
        return None
    if np.isscalar(m):
        return _num(np.real(m))
    m = np.asarray(m)
    if m.shape == (1, 1):
        return _num(m[0, 0].real) if abs(m[0, 0].imag) <= qmath.EPS else _jsonable_matrix(m)
    return _jsonable_matrix(m)


def _jsonable_matrix(m: np.ndarray) -> dict:
    return {
        "re": [[_num(x) for x in row] for row in m.real],
        "im": [[_num(x) for x in row] for row in m.imag],
    }


def theorem_basis(dists: Sequence, system: System) -> tuple:
    """Which result backs a verdict, plus warnings for ground-only inputs."""
    open_inputs = set()
    for d in dists:
        for p in d.processes():
            open_inputs |= uic(p, system.channels)
    if open_inputs:
        warning = (
            "unrestricted quantum input channel(s) "
            + ", ".join(sorted(open_inputs))
            + ": the verdict covers ground bisimilarity only"
        )
        return BASIS_GROUND_ONLY, [warning]
    return BASIS_PROC_G, []


class _Checker:
    def __init__(self, system: System, eps: float):
        self.system = system
        self.eps = eps
        self.memo: dict = {}
        self.pairs = 0
        self.max_depth = 0

    def local_mismatch(self, d: QuantumDist, t: QuantumDist) -> dict | None:
        if d.is_empty() and t.is_empty():
            return None
        if d.is_empty() or t.is_empty():
            env_d, env_t = env(d, self.system), env(t, self.system)
            nonzero = env_t if d.is_empty() else env_d
            return {
                "kind": "one-sided",
                "left": env_d,
                "right": env_t,
                "max_abs_diff": float(np.max(np.abs(nonzero))),
            }
        ty_d = type_distribution(d, self.system.channels, self.system.qubits)
        ty_t = type_distribution(t, self.system.channels, self.system.qubits)
        if ty_d.sigma_p != ty_t.sigma_p:
            return {
                "kind": "type",
                "left": None,
                "right": None,
                "max_abs_diff": 0.0,
                "detail": f"owned qubits {sorted(ty_d.sigma_p)} vs {sorted(ty_t.sigma_p)}",
            }
        env_d, env_t = env(d, self.system), env(t, self.system)
        diff = qmath.max_abs_diff(env_d, env_t)
        if diff > self.eps:
            return {"kind": "env", "left": env_d, "right": env_t, "max_abs_diff": diff}
        return None

    def alphabet(self, d: QuantumDist, t: QuantumDist) -> list:
        left = set(enabled_q(d, self.system))
        right = set(enabled_q(t, self.system))
        one_sided = sorted(left ^ right, key=lambda sa: sort_key(*sa))
        shared = sorted(left & right, key=lambda sa: sort_key(*sa))
        return one_sided + shared

    def explore(self, d: QuantumDist, t: QuantumDist, depth: int):
        key = (d.key(), t.key())
        if key in self.memo:
            return self.memo[key]
        self.pairs += 1
        self.max_depth = max(self.max_depth, depth)
        result = None
        mismatch = self.local_mismatch(d, t)
        if mismatch is not None:
            result = ((), mismatch)
        else:
            for sched, action in self.alphabet(d, t):
                d2 = qdist_step(d, sched, action, self.system)
                t2 = qdist_step(t, sched, action, self.system)
                sub = self.explore(d2, t2, depth + 1)
                if sub is not None:
                    result = (((sched, action),) + sub[0], sub[1])
                    break
        self.memo[key] = result
        return result


def ground_bisim(
    d: QuantumDist,
    t: QuantumDist,
    system: System,
    *,
    eps: float = qmath.EPS,
    threads: int = 1,
) -> Verdict:
    """Decide ground bisimilarity of two quantum distributions.

    ``threads`` is accepted for interface stability; exploration is
    sequential so verdicts and witnesses never depend on it.
    """
    start = time.perf_counter()
    basis, warnings = theorem_basis([d, t], system)
    checker = _Checker(system, eps)
    found = checker.explore(d, t, 0)
    stats = {
        "pairs_visited": checker.pairs,
        "max_depth": checker.max_depth,
        "wall_ms": round((time.perf_counter() - start) * 1000, 3),
    }
    if found is None:
        return Verdict(True, basis, warnings=warnings, stats=stats)
    path, mismatch = found
    return Verdict(False, basis, list(path), mismatch, warnings=warnings, stats=stats)


def replay_witness(d: QuantumDist, t: QuantumDist, witness, system: System) -> tuple:
    """Follow ``witness`` on both sides and return the final pair."""
    for sched, action in witness:
        d = qdist_step(d, sched, action, system)
        t = qdist_step(t, sched, action, system)
    return d, t


def identity_probe(n_qubits: int) -> qmath.Superoperator:
    return qmath.Superoperator((np.eye(2**n_qubits),), "identity")


def superop_probe(
    d: QuantumDist,
    t: QuantumDist,
    probes: Sequence[qmath.Superoperator],
    system: System,
    *,
    qubits: Sequence[str] | None = None,
    eps: float = qmath.EPS,
) -> Verdict:
    """Check ``E(d)`` against ``E(t)`` for the identity and every probe ``E``.

    A failure refutes full labelled bisimilarity. Passing every probe is
    evidence, not proof, and the verdict says so.
    """
    reference = d if not d.is_empty() else t
    if reference.is_empty():
        return ground_bisim(d, t, system, eps=eps)
    owned = system.sigma(reference.processes()[0])
    env_qubits = list(qubits) if qubits is not None else [q for q in system.qubits if q not in owned]
    candidates = [identity_probe(len(env_qubits))] + list(probes)
    total_pairs = 0
    for probe in candidates:
        if probe.n_qubits != len(env_qubits):
            raise SemanticsError(
                f"probe {probe.name or '?'} acts on {probe.n_qubits} qubits, "
                f"environment has {len(env_qubits)}"
            )
        verdict = ground_bisim(
            apply_env_superop(probe, d, system, env_qubits),
            apply_env_superop(probe, t, system, env_qubits),
            system,
            eps=eps,
        )
        total_pairs += verdict.stats["pairs_visited"]
        if not verdict.equivalent:
            verdict.notes.append(f"refuted after applying probe {probe.name or '?'} to the environment")
            return verdict
    verdict.notes.append(
        f"all {len(candidates)} probes passed; this does not prove full labelled bisimilarity"
    )
    verdict.stats["pairs_visited"] = total_pairs
    return verdict


@dataclass
class StepReport:
    """Masses reached after one step of a context replay."""

    index: int
    scheduler: str
    action: str
    masses: list
    warnings: list = field(default_factory=list)

    @property
    def max_mass(self) -> float:
        return max(self.masses) if self.masses else 0.0

    @property
    def min_mass(self) -> float:
        return min(self.masses) if self.masses else 0.0

    def to_json(self) -> dict:
        return {
            "step": self.index,
            "scheduler": self.scheduler,
            "action": self.action,
            "masses": [_num(m) for m in self.masses],
            "max_mass": _num(self.max_mass),
            "min_mass": _num(self.min_mass),
            "warnings": list(self.warnings),
        }


WILDCARD = "*"


def compose(dist: ProbDist, context: Process, system: System) -> ProbDist:
    """Put every element of ``dist`` in parallel with ``context``."""
    shared = tags_of(dist) & tags_of(context)
    if shared:
        raise SemanticsError(f"context shares tags {sorted(shared)} with the process")
    for p in dist.processes():
        try:
            typecheck(Par(p, context), system.channels)
        except TypingError as exc:
            raise SemanticsError(f"incompatible context: {exc}") from None
    return ProbDist((w, rho, Par(p, context)) for w, rho, p in dist.entries)


def context_replay(
    dist: ProbDist,
    context: Process,
    schedule: Sequence[tuple],
    system: System,
    mode: str = "scheduled",
) -> list:
    """Run ``dist`` under ``context`` along ``schedule`` and report masses.

    ``schedule`` holds ``(scheduler, action)`` pairs. In scheduled mode a
    scheduler of ``"*"`` branches over every enabled scheduler. In
    unscheduled mode only the actions matter: every element independently
    picks any move with that action, and elements without one vanish.
    """
    if mode not in ("scheduled", "unscheduled"):
        raise ValueError(f"unknown replay mode {mode!r}")
    start = compose(dist, context, system)
    known_tags = tags_of(start)
    frontier = {start.key(): start}
    reports = []
    for index, (sched, action) in enumerate(schedule, 1):
        warnings = []
        if sched != WILDCARD:
            used = set(sched) if isinstance(sched, tuple) else {sched}
            unknown = used - known_tags
            if unknown:
                warnings.append(f"unknown tag(s) {sorted(unknown)}: step yields the empty distribution")
        nxt: dict = {}
        for d in frontier.values():
            if mode == "unscheduled":
                succs = unscheduled_successors(d, action, system, deadlock=False)
            elif sched == WILDCARD:
                choices = [s for s, a in enabled(d, system) if a == action]
                succs = [scheduled_step(d, s, action, system) for s in choices] or [EMPTY]
            else:
                succs = [scheduled_step(d, sched, action, system)]
            for s in succs:
                nxt.setdefault(s.key(), s)
        frontier = nxt
        masses = sorted({round(d.mass(), 12) for d in frontier.values()})
        reports.append(StepReport(index, sched_str(sched), str(action), masses, warnings))
    return reports


def action_masses(dist: QuantumDist, action: Action, system: System) -> list:
    """Probabilities with which ``action`` can be observed, over all runs.

    Exhaustively explores the quantum distribution semantics and records the
    total trace of every successor reached by a move labelled ``action``.
    """
    seen = set()
    found = set()
    stack = [dist]
    while stack:
        d = stack.pop()
        if d.key() in seen:
            continue
        seen.add(d.key())
        for sched, act in enabled_q(d, system):
            succ = qdist_step(d, sched, act, system)
            if act == action:
                found.add(round(succ.total_trace(), 12))
            if not succ.is_empty():
                stack.append(succ)
    return sorted(found)


__all__ = [
    "BASIS_GROUND_ONLY",
    "BASIS_PROC_G",
    "StepReport",
    "Verdict",
    "WILDCARD",
    "action_masses",
    "compose",
    "context_replay",
    "ground_bisim",
    "replay_witness",
    "superop_probe",
    "theorem_basis",
]
