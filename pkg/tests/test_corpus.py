import shutil

import pytest

from p4ifc.corpus import corpus_root, expected_verdict, list_cases, lookup
from p4ifc.runtime import ControlPlane


def test_case_count_and_ids():
    ids = [c.id for c in list_cases()]
    assert len(ids) == 11 and len(set(ids)) == 11
    assert "isolation-bob" in ids
    assert sum(c.accepted for c in list_cases()) == 6


@pytest.mark.parametrize("case", list_cases(), ids=lambda c: c.id)
def test_case_invariants(case):
    lat = case.load_lattice()
    assert case.pc in lat
    assert set(case.observers) == set(lat.elements)
    assert case.filename == f"{case.id}.p4s"
    assert case.accepted == (case.variant != "buggy")
    assert expected_verdict(case) == (case.accepted, case.expected)
    assert [line for _, line in case.expected] == sorted(line for _, line in case.expected)
    # entries and stores load against the program
    p, v = case.program(), case.check()
    assert isinstance(case.control_plane(p, v), ControlPlane)
    case.store_spec()


def test_lookup_variants():
    assert lookup("cache", "buggy").expected == (("T-TblDecl", 16),)
    assert lookup("topology", "fixed").accepted
    assert lookup("topology").variant == "fixed"
    bob = lookup("isolation-bob")
    assert (bob.variant, bob.lattice, bob.pc) == (None, "diamond", "B")
    with pytest.raises(KeyError):
        lookup("nope")


def test_variant_specific_entries_win():
    assert "set_priority" in lookup("app", "buggy").entries
    assert lookup("app", "buggy").entries != lookup("app", "fixed").entries
    assert lookup("isolation-alice", "buggy").entries != lookup("isolation-alice", "fixed").entries


def test_loose_directory(tmp_path):
    root = corpus_root()
    for name in ("cache-buggy.p4s", "cache.entries"):
        shutil.copy(root / name, tmp_path / name)
    (case,) = list_cases(tmp_path)
    assert case.id == "cache-buggy"
    assert case.store == ""
    assert not case.check().accepted


def test_empty_directory(tmp_path):
    assert list_cases(tmp_path) == []
