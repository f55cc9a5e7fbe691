import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from circuits import always_circuit, im_circuit, not_recurrence, random_circuit
from rdtlgn.circuit import InputMask, run
from rdtlgn.metrics import (
    EvalReport,
    abstention_profile,
    accuracy,
    fixed_point_probe,
    lattice_compliance,
    preservation,
    preservation_of,
)
from rdtlgn.ternary import leq_information

seeds = st.integers(0, 100_000)


def naive_preservation(c, X):
    base = run(c, X)
    flips = total = 0
    for i in range(X.shape[1]):
        Xm = X.copy()
        Xm[:, i, :] = 0
        v = run(c, Xm)
        for a, b in zip(base.ravel(), v.ravel()):
            flips += a * b == -1
            total += 1
    return 1 - flips / total


def naive_lattice(c, X, covering_only=False):
    P = X.shape[1]
    subsets = [frozenset(s) for r in range(P + 1) for s in itertools.combinations(range(P), r)]

    def verdicts(U):
        Xm = X.copy()
        Xm[:, [i for i in range(P) if i not in U], :] = 0
        return run(c, Xm)

    ok = total = 0
    for A in subsets:
        for B in subsets:
            if A < B and (not covering_only or len(B - A) == 1):
                for a, b in zip(verdicts(A).ravel(), verdicts(B).ravel()):
                    ok += leq_information(int(a), int(b))
                    total += 1
    return ok / total


@settings(max_examples=20)
@given(seeds)
def test_preservation_matches_naive(seed):
    rng = np.random.default_rng(seed)
    c = random_circuit(seed=seed, P=3)
    X = rng.integers(-1, 2, (4, 3, 5)).astype(np.int8)
    assert preservation(c, X) == pytest.approx(naive_preservation(c, X))
    assert preservation_of(lambda s: run(c, s), X) == pytest.approx(naive_preservation(c, X))


@settings(max_examples=20)
@given(seeds, st.booleans())
def test_lattice_matches_naive(seed, covering):
    rng = np.random.default_rng(seed)
    c = random_circuit(seed=seed, P=3)
    X = rng.integers(-1, 2, (3, 3, 4)).astype(np.int8)
    assert lattice_compliance(c, X, covering) == pytest.approx(naive_lattice(c, X, covering))


@settings(max_examples=20)
@given(seeds)
def test_covering_compliance_implies_full(seed):
    # the information order is transitive, so chains of covering pairs decide every pair
    rng = np.random.default_rng(seed)
    c = random_circuit(seed=seed, P=3)
    X = rng.integers(-1, 2, (3, 3, 4)).astype(np.int8)
    if lattice_compliance(c, X, covering_only=True) == 1.0:
        assert lattice_compliance(c, X) == 1.0


@settings(max_examples=20)
@given(seeds)
def test_im_circuits_score_perfectly(seed):
    rng = np.random.default_rng(seed)
    c = im_circuit(seed=seed, P=3, S=2)
    X = rng.integers(-1, 2, (3, 3, 6)).astype(np.int8)
    assert preservation(c, X) == 1.0
    assert lattice_compliance(c, X) == 1.0
    curve = abstention_profile(c, X)
    assert curve[3] == 1.0
    assert all(curve[k] <= curve[k + 1] + 1e-12 for k in range(3))


def test_abstention_profile_sampling():
    c = im_circuit(seed=0, P=4, S=2)
    X = np.random.default_rng(0).integers(-1, 2, (2, 4, 5)).astype(np.int8)
    full = abstention_profile(c, X, max_masks=100)
    sampled = abstention_profile(c, X, levels=[2], max_masks=3, seed=1)
    assert set(sampled) == {2}
    assert 0.0 <= sampled[2] <= 1.0
    assert full[0] == pytest.approx((run(c, X) == 0).mean())


def test_accuracy():
    assert accuracy([1, 0, -1, 1], [1, 0, 1, -1]) == 0.5
    assert accuracy(np.zeros((2, 3)), np.zeros((2, 3))) == 1.0
    with pytest.raises(ValueError):
        accuracy([1, 0], [1])


def test_preservation_counts_only_sign_flips():
    c = always_circuit()
    X = np.array([[[1, -1, 1]]], dtype=np.int8)
    # masking the only predicate turns verdicts to 0 or keeps -1: no flips
    assert preservation(c, X) == 1.0
    assert preservation(c, X, baseline_verdicts=run(c, X)) == 1.0


@pytest.mark.parametrize("seed", range(5))
def test_probe_im_converges_within_S(seed):
    c = im_circuit(seed=seed, P=2, S=3)
    for p in itertools.product((-1, 0, 1), repeat=2):
        r = fixed_point_probe(c, p)
        assert r.converged and r.ascending
        assert r.steps <= c.config.S


def test_probe_not_recurrence():
    c = not_recurrence()
    r = fixed_point_probe(c, [0])
    assert r.converged and r.steps == 0
    r = fixed_point_probe(c, [0], h0=[1])
    assert not r.converged and r.cycle_period == 2
    assert not r.ascending


def test_eval_report_validation():
    rep = EvalReport("S01", "CtQ", 0.5, 1.0, None, {0: 0.1}, {})
    assert rep.to_dict()["abstention_curve"] == {"0": 0.1}
    with pytest.raises(ValueError):
        EvalReport("S01", "CtQ", 1.5, 1.0, None, {}, {})


def test_masking_everything_gives_blackout():
    c = im_circuit(seed=4, P=2, S=2)
    X = np.ones((1, 2, 3), dtype=np.int8)
    assert not run(c, X, InputMask([0, 1])).any()


@pytest.mark.parametrize("S", [1, 2, 4])
def test_probe_shift_register_needs_S_steps(S):
    from circuits import shift_register

    r = fixed_point_probe(shift_register(S), [1])
    assert r.converged and r.ascending and r.steps == S
    assert r.chain[-1] == (1,) * S
