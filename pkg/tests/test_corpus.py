import pytest

from lqcheck.corpus import ENTRIES, load, source_names


def test_corpus_has_all_named_entries():
    expected = {
        "quantum_lottery", "sources_01_vs_pm", "sources_vs_maxmixed", "ftl_scheduled",
        "ftl_unscheduled_replay", "broken_nondet_replay", "sdc", "teleportation",
        "qcf_correctness", "qcf_alice_confidentiality", "alison_attack", "alix_attack",
        "superopneed_probe",
    }
    assert set(ENTRIES) == expected


@pytest.mark.parametrize("name", sorted(ENTRIES))
def test_entry_source_exists(name):
    assert ENTRIES[name].source in source_names()


@pytest.mark.parametrize("name", sorted(ENTRIES))
def test_entry_passes(name):
    outcome = ENTRIES[name].run()
    assert outcome.passed, outcome.summary


@pytest.mark.parametrize("name", source_names())
def test_every_source_builds_a_system(name):
    prog, system = load(name)
    assert list(system.qubits) == list(prog.qubits)
