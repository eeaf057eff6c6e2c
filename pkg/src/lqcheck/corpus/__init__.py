"""Built-in protocol corpus.

Each entry names the ``.lq`` source it uses and a check that reproduces a
known result about it. Sources live next to this module and double as
parser fixtures.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from importlib import resources
from typing import Callable

import numpy as np

from .. import qmath
from ..bisim import Verdict, action_masses, context_replay, ground_bisim, superop_probe
from ..lang import Program, parse
from ..plts import TAU, ProbDist, System, parse_action, scheduled_step
from ..qlts import QuantumDist, alpha, qdist_step

TELEPORT_STATES = ("0", "1", "+", "i")
TELEPORT_RANDOM = 10
TELEPORT_SEED = 20240611


def source_text(name: str) -> str:
    """Text of ``sources/<name>.lq``."""
    return resources.files(__package__).joinpath("sources", f"{name}.lq").read_text()


def source_names() -> list:
    folder = resources.files(__package__).joinpath("sources")
    return sorted(p.name[:-3] for p in folder.iterdir() if p.name.endswith(".lq"))


def load(name: str) -> tuple:
    """Parse a corpus source and build its :class:`System`."""
    prog = parse(source_text(name))
    return prog, System.from_program(prog)


def initial_rho(prog: Program) -> np.ndarray:
    """The initial state as a single density operator (ensemble average)."""
    return sum(w * rho for w, rho in prog.initial_ensemble())


def point(prog: Program, proc: str, rho: np.ndarray | None = None) -> QuantumDist:
    rho = initial_rho(prog) if rho is None else rho
    return QuantumDist.point(rho, prog.process(proc))


@dataclass
class Outcome:
    passed: bool
    summary: str
    details: dict = field(default_factory=dict)


@dataclass
class CorpusEntry:
    """A named corpus check with its expected outcome."""

    name: str
    source: str
    expected: str
    check: Callable[[], Outcome]
    pair: Callable[[], tuple] | None = None

    def run(self) -> Outcome:
        return self.check()


def _bisim_check(pair: Callable[[], tuple], want: bool = True) -> Callable[[], Outcome]:
    def check() -> Outcome:
        d, t, system = pair()
        v = ground_bisim(d, t, system)
        word = "equivalent" if v.equivalent else "not equivalent"
        return Outcome(v.equivalent == want, word, {"verdict": v.to_json()})

    return check


# Pairs -------------------------------------------------------------------------


def _pair(source: str, left: str, right: str) -> Callable[[], tuple]:
    def build() -> tuple:
        prog, system = load(source)
        return point(prog, left), point(prog, right), system

    return build


def sources_dists(kind: str) -> tuple:
    """Initial ensemble ``kind`` ("01", "pm" or "mixed") for the qubit source."""
    prog, system = load("sources")
    src = prog.process("Src")
    if kind == "01":
        pairs = [(0.5, qmath.outer(qmath.ket("0"))), (0.5, qmath.outer(qmath.ket("1")))]
    elif kind == "pm":
        pairs = [(0.5, qmath.outer(qmath.ket("+"))), (0.5, qmath.outer(qmath.ket("-")))]
    else:
        pairs = [(1.0, qmath.maxmixed(1))]
    return ProbDist.ensemble(pairs, src), system


def _sources_pair(a: str, b: str) -> Callable[[], tuple]:
    def build() -> tuple:
        da, system = sources_dists(a)
        db, _ = sources_dists(b)
        return alpha(da), alpha(db), system

    return build


def teleport_states() -> list:
    """Named and seeded random single-qubit states ``(label, ket)``."""
    states = [(f"|{lab}>", qmath.ket(lab)) for lab in TELEPORT_STATES]
    rng = np.random.default_rng(TELEPORT_SEED)
    for i in range(TELEPORT_RANDOM):
        v = rng.normal(size=2) + 1j * rng.normal(size=2)
        states.append((f"random{i}", v / np.linalg.norm(v)))
    return states


def teleport_pair(psi: np.ndarray) -> tuple:
    prog, system = load("teleportation")
    rho = qmath.tensor(qmath.outer(psi), qmath.outer(qmath.ket("PhiPlus")))
    return point(prog, "Tel", rho), point(prog, "Spec", rho), system


# Checks ------------------------------------------------------------------------


def quantum_lottery() -> Outcome:
    prog, system = load("quantum_lottery")
    d = ProbDist.point(initial_rho(prog), prog.process())
    for sched in ["t2", ("t3", "t4"), "t4"]:
        d = scheduled_step(d, sched, TAU, system)
    a = scheduled_step(d, "t5", parse_action("a!1"), system).mass()
    b = scheduled_step(d, "t6", parse_action("b!1"), system).mass()
    ok = abs(a - 0.5) <= qmath.EPS and abs(b - 0.5) <= qmath.EPS
    return Outcome(ok, f"a!1 with {a:.12g}, b!1 with {b:.12g}", {"a": a, "b": b})


def ftl_replay_masses() -> dict:
    """Final masses of the unscheduled four-step replay for both FTL sides."""
    prog, system = load("ftl")
    observer = prog.process("Obs")
    schedule = [("*", TAU)] * 4
    out = {}
    for side in ("Left", "Right"):
        d = ProbDist.point(initial_rho(prog), prog.process(side))
        out[side] = context_replay(d, observer, schedule, system, "unscheduled")[-1].masses
    return out


def ftl_unscheduled() -> Outcome:
    masses = ftl_replay_masses()
    left, right = max(masses["Left"]), max(masses["Right"])
    ok = abs(left - 0.75) <= qmath.EPS and abs(right - 0.5) <= qmath.EPS
    return Outcome(ok, f"max mass {left:.12g} vs {right:.12g}", masses)


BROKEN_NONDET_SCHEDULE = [(("t0", "t1"), TAU), ("*", TAU), ("t4", TAU)]


def broken_nondet_masses(mode: str) -> dict:
    prog, system = load("broken_nondet")
    observer = prog.process("Obs")
    out = {}
    for kind in ("01", "pm"):
        d, _ = sources_dists(kind)
        reports = context_replay(d, observer, BROKEN_NONDET_SCHEDULE, system, mode)
        out[kind] = reports[-1].masses
    return out


def broken_nondet() -> Outcome:
    un = broken_nondet_masses("unscheduled")
    sc = broken_nondet_masses("scheduled")
    ok = (
        abs(max(un["01"]) - 0.75) <= qmath.EPS
        and all(abs(m - 0.5) <= qmath.EPS for m in un["pm"])
        and sc["01"] == sc["pm"]
        and abs(max(sc["01"]) - 0.5) <= qmath.EPS
    )
    summary = (
        f"unscheduled max {max(un['01']):.12g} vs {un['pm']}; "
        f"scheduled {sc['01']} vs {sc['pm']}"
    )
    return Outcome(ok, summary, {"unscheduled": un, "scheduled": sc})


def sdc_choice_masses() -> dict:
    """Probability of ``out!n`` after choosing ``t_n`` and running to the end."""
    prog, system = load("sdc")
    d = point(prog, "SDC")
    out = {}
    for n in range(4):
        e = qdist_step(d, f"t{n}", TAU, system)
        for sched in [("t", "t"), "t", "t", "t"]:
            e = qdist_step(e, sched, TAU, system)
        out[n] = {m: qdist_step(e, "t", parse_action(f"out!{m}"), system).total_trace() for m in range(4)}
    return out


def sdc() -> Outcome:
    d, t, system = _pair("sdc", "SDC", "Spec")()
    v = ground_bisim(d, t, system)
    masses = sdc_choice_masses()
    runs_ok = all(
        abs(masses[n][m] - (1.0 if m == n else 0.0)) <= qmath.EPS for n in range(4) for m in range(4)
    )
    word = "equivalent" if v.equivalent else "not equivalent"
    return Outcome(v.equivalent and runs_ok, f"{word}; out!n certain per choice: {runs_ok}", masses)


def teleportation() -> Outcome:
    failures = []
    for label, psi in teleport_states():
        d, t, system = teleport_pair(psi)
        if not ground_bisim(d, t, system).equivalent:
            failures.append(label)
    n = len(TELEPORT_STATES) + TELEPORT_RANDOM
    return Outcome(not failures, f"{n - len(failures)}/{n} states equivalent", {"failures": failures})


def _attack(source: str, left: str, right: str, cheat: float) -> Callable[[], Outcome]:
    def check() -> Outcome:
        d, t, system = _pair(source, left, right)()
        v = ground_bisim(d, t, system)
        masses = action_masses(d, parse_action("cheat!1"), system)
        worst = max(masses, default=0.0)
        ok = v.equivalent and abs(worst - cheat) <= qmath.EPS
        word = "equivalent" if v.equivalent else "not equivalent"
        return Outcome(ok, f"{word}; P(cheat!1) = {worst:.12g}", {"cheat_masses": masses})

    return check


def superopneed() -> Outcome:
    prog, system = load("superopneed")
    d, t = point(prog, "P"), point(prog, "Q")
    plain = ground_bisim(d, t, system)
    probed = superop_probe(d, t, [qmath.SH], system)
    diff = probed.mismatch["max_abs_diff"] if probed.mismatch else 0.0
    last = str(probed.witness[-1][1]) if probed.witness else ""
    ok = plain.equivalent and not probed.equivalent and last == "c!1" and abs(diff - 0.5) <= qmath.EPS
    summary = f"identity: {'pass' if plain.equivalent else 'fail'}; SH: fails at {last} by {diff:.12g}"
    return Outcome(ok, summary, {"probe": probed.to_json()})


ENTRIES = {
    e.name: e
    for e in [
        CorpusEntry("quantum_lottery", "quantum_lottery", "a!1 and b!1 each with mass 1/2", quantum_lottery),
        CorpusEntry(
            "sources_01_vs_pm", "sources", "equivalent",
            _bisim_check(_sources_pair("01", "pm")), _sources_pair("01", "pm"),
        ),
        CorpusEntry(
            "sources_vs_maxmixed", "sources", "equivalent",
            _bisim_check(_sources_pair("01", "mixed")), _sources_pair("01", "mixed"),
        ),
        CorpusEntry(
            "ftl_scheduled", "ftl", "equivalent",
            _bisim_check(_pair("ftl", "Left", "Right")), _pair("ftl", "Left", "Right"),
        ),
        CorpusEntry("ftl_unscheduled_replay", "ftl", "max final mass 3/4 vs 1/2", ftl_unscheduled),
        CorpusEntry(
            "broken_nondet_replay", "broken_nondet",
            "unscheduled max 3/4 vs always 1/2; scheduled sets agree", broken_nondet,
        ),
        CorpusEntry("sdc", "sdc", "equivalent; out!n with certainty", sdc, _pair("sdc", "SDC", "Spec")),
        CorpusEntry(
            "teleportation", "teleportation", "equivalent for every tested state", teleportation,
            lambda: teleport_pair(qmath.ket("+")),
        ),
        CorpusEntry(
            "qcf_correctness", "qcf", "equivalent",
            _bisim_check(_pair("qcf", "QCF", "FairCoin")), _pair("qcf", "QCF", "FairCoin"),
        ),
        CorpusEntry(
            "qcf_alice_confidentiality", "qcf", "equivalent",
            _bisim_check(_pair("qcf", "Alice0", "Alice1")), _pair("qcf", "Alice0", "Alice1"),
        ),
        CorpusEntry(
            "alison_attack", "qcf", "equivalent; P(cheat!1) = 1/4",
            _attack("qcf", "QCF1", "LeakyUnfairCoin", 0.25), _pair("qcf", "QCF1", "LeakyUnfairCoin"),
        ),
        CorpusEntry(
            "alix_attack", "alix", "equivalent; P(cheat!1) = 0",
            _attack("alix", "QCF2", "UnfairCoin", 0.0), _pair("alix", "QCF2", "UnfairCoin"),
        ),
        CorpusEntry(
            "superopneed_probe", "superopneed", "identity passes; SH refutes at c!1 by 1/2",
            superopneed, _pair("superopneed", "P", "Q"),
        ),
    ]
}


def bisim_verdict(name: str) -> Verdict:
    entry = ENTRIES[name]
    if entry.pair is None:
        raise KeyError(f"corpus entry {name!r} is not a bisimulation pair")
    d, t, system = entry.pair()
    return ground_bisim(d, t, system)
