import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from rdtlgn.ternary import (
    CONST_F,
    CONST_T,
    CONST_U,
    GRID,
    KLEENE_AND,
    KLEENE_NOT,
    KLEENE_OR,
    N_GATES,
    PROJ_1,
    TRITS,
    GateTable,
    Trit,
    VocabTag,
    VocabularyKind,
    all_tables,
    apply_gate,
    census,
    check_trit,
    classify_gate,
    entries_to_id,
    enumerate_vocabulary,
    hamming_distance,
    id_to_entries,
    im_mask,
    leq_information,
    leq_numerical,
    nm_mask,
    slot,
)

trits = st.sampled_from(TRITS)
gate_ids = st.integers(0, N_GATES - 1)


def test_numerical_order():
    assert leq_numerical(-1, 0)
    assert leq_numerical(1, 1)
    assert not leq_numerical(1, -1)


def test_information_order():
    assert leq_information(0, 1)
    assert not leq_information(-1, 1)
    assert leq_information(0, 0)
    assert not leq_information(1, 0)


def test_information_order_is_partial_order():
    for a in TRITS:
        assert leq_information(a, a)
    for a, b in itertools.product(TRITS, repeat=2):
        if leq_information(a, b) and leq_information(b, a):
            assert a == b
    for a, b, c in itertools.product(TRITS, repeat=3):
        if leq_information(a, b) and leq_information(b, c):
            assert leq_information(a, c)


def test_check_trit():
    assert check_trit(Trit.U) == 0
    with pytest.raises(ValueError):
        check_trit(2)
    with pytest.raises(ValueError):
        GateTable((0,) * 8)


def test_slot_layout():
    assert [slot(a, b) for a, b in GRID] == list(range(9))
    assert GRID[0] == (-1, -1) and GRID[1] == (-1, 0) and GRID[3] == (0, -1)


def test_apply_gate_examples():
    assert apply_gate(KLEENE_AND, 0, -1) == -1
    assert apply_gate(KLEENE_OR, 0, 1) == 1
    assert apply_gate(KLEENE_NOT, 0, 1) == 0
    assert apply_gate(KLEENE_NOT, 1, 0) == -1


def test_kleene_is_min_max():
    for a, b in GRID:
        assert KLEENE_AND(a, b) == min(a, b)
        assert KLEENE_OR(a, b) == max(a, b)


def test_kleene_ids():
    # base-3 digits of the min table, slot 0 is least significant
    expected_and = sum((min(a, b) + 1) * 3**i for i, (a, b) in enumerate(GRID))
    expected_or = sum((max(a, b) + 1) * 3**i for i, (a, b) in enumerate(GRID))
    assert (expected_and, expected_or) == (15633, 19569)
    assert KLEENE_AND.id == 15633
    assert KLEENE_OR.id == 19569


@given(gate_ids)
def test_id_roundtrip(gid):
    assert entries_to_id(id_to_entries(gid)) == gid
    assert GateTable.from_id(gid).id == gid


def test_all_tables_match_decoder():
    t = all_tables()
    assert t.shape == (N_GATES, 9)
    for gid in (0, 1, 15633, N_GATES - 1):
        np.testing.assert_array_equal(t[gid], id_to_entries(gid))
    with pytest.raises(ValueError):
        id_to_entries(N_GATES)


def test_classify_examples():
    c = classify_gate(KLEENE_AND)
    assert (c.is_nm, c.is_im, c.is_constant) == (True, True, False)
    c = classify_gate(KLEENE_NOT)
    assert (c.is_nm, c.is_im, c.is_constant) == (False, True, False)
    c = classify_gate(CONST_U)
    assert (c.is_nm, c.is_im, c.is_constant) == (True, True, True)


def _brute_monotone(entries, leq):
    for (i, (a, b)), (j, (a2, b2)) in itertools.product(enumerate(GRID), repeat=2):
        if leq(a, a2) and leq(b, b2) and not leq(entries[i], entries[j]):
            return False
    return True


@given(gate_ids)
def test_vectorized_masks_agree_with_classifier(gid):
    g = GateTable.from_id(gid)
    c = classify_gate(g)
    assert c.is_nm == bool(nm_mask()[gid]) == _brute_monotone(g.entries, leq_numerical)
    assert c.is_im == bool(im_mask()[gid]) == _brute_monotone(g.entries, leq_information)


def test_census_counts():
    assert census() == {
        "NM": 175,
        "NM_nonconst": 172,
        "IM": 197,
        "IM_nonconst": 194,
        "NM_AND_IM": 20,
        "NM_AND_IM_nonconst": 17,
    }


def test_vocabulary_lists():
    assert len(enumerate_vocabulary(VocabularyKind(VocabTag.FULL))) == N_GATES
    nm = enumerate_vocabulary(VocabularyKind(VocabTag.NM))
    assert len(nm) == 175 and nm == sorted(nm)
    both = enumerate_vocabulary(VocabularyKind(VocabTag.NM_AND_IM, True))
    assert len(both) == 17
    assert set(both) <= set(nm) and set(both) <= set(enumerate_vocabulary(VocabularyKind(VocabTag.IM)))
    for tag in VocabTag:
        ids = enumerate_vocabulary(VocabularyKind(tag, True))
        assert KLEENE_AND.id in ids and KLEENE_OR.id in ids


def test_vocabulary_kind_text():
    k = VocabularyKind(VocabTag.NM_AND_IM, True)
    assert str(k) == "NM_AND_IM_nonconst"
    assert VocabularyKind.parse(str(k)) == k
    assert VocabularyKind.parse("IM") == VocabularyKind(VocabTag.IM, False)


def test_nonconstant_im_gates_fix_unknown():
    for gid in enumerate_vocabulary(VocabularyKind(VocabTag.IM, True)):
        assert GateTable.from_id(gid)(0, 0) == 0


def test_hamming():
    assert hamming_distance(KLEENE_AND, KLEENE_AND) == 0
    assert hamming_distance(KLEENE_AND, KLEENE_OR) == 6
    assert hamming_distance(CONST_F, CONST_T) == 9
    assert hamming_distance(PROJ_1, PROJ_1) == 0


@given(gate_ids, gate_ids)
def test_hamming_is_symmetric_metric(g1, g2):
    a, b = GateTable.from_id(g1), GateTable.from_id(g2)
    d = hamming_distance(a, b)
    assert d == hamming_distance(b, a)
    assert (d == 0) == (g1 == g2)
