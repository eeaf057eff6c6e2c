import json

import numpy as np
import pytest

from lqcheck import qmath
from lqcheck.bisim import (
    BASIS_GROUND_ONLY,
    BASIS_PROC_G,
    action_masses,
    compose,
    context_replay,
    ground_bisim,
    replay_witness,
    superop_probe,
)
from lqcheck.corpus import bisim_verdict, broken_nondet_masses, ftl_replay_masses, load, point, sources_dists
from lqcheck.lang import parse
from lqcheck.plts import TAU, SemanticsError, System, parse_action
from lqcheck.qlts import QuantumDist, alpha, env
from oracles import ensemble_dist, random_pair, random_system

HEADER = "channel c : qubit\nchannel d : bit\nqubits q\n"


def ket_dm(label):
    return qmath.outer(qmath.ket(label))


def small(*bodies):
    text = HEADER + "".join(f"proc P{i} = {b}\n" for i, b in enumerate(bodies))
    prog = parse(text)
    return [prog.process(f"P{i}") for i in range(len(bodies))], System.from_program(prog)


def test_env_mismatch_at_root():
    (p,), system = small("nil[]")
    v = ground_bisim(QuantumDist.point(ket_dm("0"), p), QuantumDist.point(ket_dm("1"), p), system)
    assert not v.equivalent and v.witness == []
    assert v.mismatch["kind"] == "env"
    assert np.isclose(v.mismatch["max_abs_diff"], 1)


def test_distinct_outputs_give_witness():
    (p, q), system = small("t:d!0 . nil[q]", "t:d!1 . nil[q]")
    d, t = QuantumDist.point(ket_dm("0"), p), QuantumDist.point(ket_dm("0"), q)
    v = ground_bisim(d, t, system)
    assert not v.equivalent
    assert len(v.witness) == 1 and v.mismatch["kind"] == "one-sided"


def test_witness_replays_to_a_real_mismatch():
    (p, q), system = small(
        "t:H(q) . t:meas M01(q > x) . t:d!x . nil[q]", "t:I(q) . t:meas M01(q > x) . t:d!x . nil[q]"
    )
    d, t = QuantumDist.point(ket_dm("0"), p), QuantumDist.point(ket_dm("0"), q)
    v = ground_bisim(d, t, system)
    assert not v.equivalent
    a, b = replay_witness(d, t, v.witness, system)
    if a.is_empty() or b.is_empty():
        assert a.is_empty() != b.is_empty()
    else:
        assert qmath.max_abs_diff(np.atleast_2d(env(a, system)), np.atleast_2d(env(b, system))) > 1e-9


def test_different_ownership_is_type_mismatch():
    (p, q), system = small("nil[q]", "nil[]")
    v = ground_bisim(QuantumDist.point(ket_dm("0"), p), QuantumDist.point(ket_dm("0"), q), system)
    assert not v.equivalent and v.mismatch["kind"] == "type"


@pytest.mark.parametrize("seed", range(8))
def test_reflexive_and_symmetric(seed):
    _, system = random_system()
    p, q, ea, eb = random_pair(seed)
    d, t = alpha(ensemble_dist(ea, p)), alpha(ensemble_dist(eb, q))
    assert ground_bisim(d, d, system).equivalent
    assert ground_bisim(d, t, system).equivalent == ground_bisim(t, d, system).equivalent


def test_thread_count_does_not_change_verdict():
    for name in ["qcf_correctness", "superopneed_probe"]:
        from lqcheck.corpus import ENTRIES

        d, t, system = ENTRIES[name].pair()
        one = ground_bisim(d, t, system, threads=1).to_json()
        four = ground_bisim(d, t, system, threads=4).to_json()
        one["stats"].pop("wall_ms"), four["stats"].pop("wall_ms")
        assert one == four


def test_verdict_json_shape():
    v = bisim_verdict("superopneed_probe")
    data = json.loads(json.dumps(v.to_json()))
    assert set(data) >= {"equivalent", "theorem_basis", "witness", "env_mismatch", "stats"}
    assert set(data["stats"]) >= {"pairs_visited", "max_depth", "wall_ms"}


def test_theorem_basis_labels():
    assert bisim_verdict("qcf_correctness").theorem_basis == BASIS_PROC_G
    v = bisim_verdict("superopneed_probe")
    assert v.theorem_basis == BASIS_GROUND_ONLY and v.warnings


def test_qcf_equivalent_to_fair_coin():
    assert bisim_verdict("qcf_correctness").equivalent


def test_sources_pairwise_equivalent():
    pm, system = sources_dists("pm")
    d01, _ = sources_dists("01")
    mixed, _ = sources_dists("mixed")
    dists = [alpha(d01), alpha(pm), alpha(mixed)]
    for i in range(3):
        for j in range(i + 1, 3):
            assert ground_bisim(dists[i], dists[j], system).equivalent


def test_literal_parallel_alison_is_distinguishable():
    prog, system = load("qcf")
    v = ground_bisim(point(prog, "QCF1Par"), point(prog, "LeakyUnfairCoin"), system)
    assert not v.equivalent


def test_superop_probe_examples():
    prog, system = load("superopneed")
    d, t = point(prog, "P"), point(prog, "Q")
    assert superop_probe(d, t, [], system).equivalent == ground_bisim(d, t, system).equivalent
    assert superop_probe(d, t, [qmath.I], system).equivalent
    v = superop_probe(d, t, [qmath.SH], system)
    assert not v.equivalent and str(v.witness[-1][1]) == "c!1"


def test_probe_arity_mismatch():
    prog, system = load("superopneed")
    with pytest.raises(SemanticsError):
        superop_probe(point(prog, "P"), point(prog, "Q"), [qmath.CNOT], system)


def test_random_probes_keep_ground_equivalence():
    _, system = random_system()
    rng = np.random.default_rng(11)
    checked = 0
    for seed in range(80):
        p, q, ea, eb = random_pair(seed)
        d, t = alpha(ensemble_dist(ea, p)), alpha(ensemble_dist(eb, q))
        if system.sigma(p) != {"q0"} or not ground_bisim(d, t, system).equivalent:
            continue
        probes = [qmath.random_channel(1, rng) for _ in range(3)]
        assert superop_probe(d, t, probes, system, qubits=["q1"]).equivalent
        checked += 1
    assert checked >= 5


def test_replay_broken_nondet():
    un = broken_nondet_masses("unscheduled")
    assert np.isclose(max(un["01"]), 0.75)
    assert all(np.isclose(m, 0.5) for m in un["pm"])
    sc = broken_nondet_masses("scheduled")
    assert sc["01"] == sc["pm"] and np.isclose(max(sc["01"]), 0.5)


def test_replay_ftl():
    masses = ftl_replay_masses()
    assert np.isclose(max(masses["Left"]), 0.75)
    assert np.isclose(max(masses["Right"]), 0.5)


def test_replay_unknown_tag_warns():
    prog, system = load("broken_nondet")
    d, _ = sources_dists("01")
    reports = context_replay(d, prog.process("Obs"), [("zz", TAU)], system)
    assert reports[0].warnings and reports[0].masses == [0.0]


def test_compose_rejects_shared_tags():
    prog, system = load("broken_nondet")
    d, _ = sources_dists("01")
    with pytest.raises(SemanticsError, match="shares tags"):
        compose(d, prog.process("Src"), system)


def test_replay_rejects_unknown_mode():
    prog, system = load("broken_nondet")
    d, _ = sources_dists("01")
    with pytest.raises(ValueError):
        context_replay(d, prog.process("Obs"), [], system, "sideways")


def test_action_masses_lottery():
    prog, system = load("quantum_lottery")
    masses = action_masses(point(prog, "QL"), parse_action("a!1"), system)
    assert 0.5 in masses and 1.0 not in masses
