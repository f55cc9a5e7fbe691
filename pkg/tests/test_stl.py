import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from rdtlgn.specs import SPECS
from rdtlgn.stl import (
    Always,
    And,
    Eventually,
    FormulaSyntaxError,
    Interval,
    LabelConfig,
    Not,
    Or,
    Pred,
    RobustnessInterval,
    Until,
    causal_verdicts,
    depth_bound,
    horizon,
    make_labels,
    parse_formula,
    predicates,
    quantize_signal,
    robustness_causal,
    robustness_oracle,
    robustness_qtc,
    robustness_trace,
    state_complexity,
    temporal_depth,
    to_text,
)


# independent scalar semantics, written straight from the definitions
def window(t, a, b, T):
    if t + a > T - 1:
        return [T - 1]
    return list(range(t + a, min(t + b, T - 1) + 1))


def rho(phi, x, t):
    T = len(x[0])
    if isinstance(phi, Pred):
        return x[phi.index][t]
    if isinstance(phi, Not):
        return -rho(phi.child, x, t)
    if isinstance(phi, And):
        return min(rho(phi.left, x, t), rho(phi.right, x, t))
    if isinstance(phi, Or):
        return max(rho(phi.left, x, t), rho(phi.right, x, t))
    iv = phi.interval
    ws = window(t, iv.a, iv.b, T)
    if isinstance(phi, Always):
        return min(rho(phi.child, x, s) for s in ws)
    if isinstance(phi, Eventually):
        return max(rho(phi.child, x, s) for s in ws)
    best = -np.inf
    for tau in ws:
        pre = min(rho(phi.left, x, s) for s in range(t, tau + 1))
        best = max(best, min(rho(phi.right, x, tau), pre))
    return best


def formulas(P=2, max_depth=3):
    iv = st.builds(lambda a, w: Interval(a, a + w), st.integers(0, 2), st.integers(0, 3))
    leaf = st.builds(Pred, st.integers(0, P - 1))

    def extend(children):
        return st.one_of(
            st.builds(Not, children),
            st.builds(And, children, children),
            st.builds(Or, children, children),
            st.builds(Always, iv, children),
            st.builds(Eventually, iv, children),
            st.builds(Until, iv, children, children),
        )

    return st.recursive(leaf, extend, max_leaves=5).filter(lambda f: temporal_depth(f) <= max_depth)


def signal(P, T, values=None):
    el = st.sampled_from(values) if values else st.floats(-1, 1, allow_nan=False)
    return st.lists(st.lists(el, min_size=T, max_size=T), min_size=P, max_size=P).map(np.array)


# --- parsing -------------------------------------------------------------


def test_parse_examples():
    assert parse_formula("G[0,3](p1 U[0,3] p0)") == Always(Interval(0, 3), Until(Interval(0, 3), Pred(1), Pred(0)))
    assert parse_formula("p0") == Pred(0)
    assert parse_formula(" ! p0 & p1 | p2 ") == Or(And(Not(Pred(0)), Pred(1)), Pred(2))
    assert parse_formula("p0 U[0,1] p1 | p2") == Until(Interval(0, 1), Pred(0), Or(Pred(1), Pred(2)))
    assert parse_formula("F[1,2] G[0,1] p0") == Eventually(Interval(1, 2), Always(Interval(0, 1), Pred(0)))


def test_until_is_right_associative():
    assert parse_formula("p0 U[0,1] p1 U[0,2] p2") == Until(
        Interval(0, 1), Pred(0), Until(Interval(0, 2), Pred(1), Pred(2))
    )


@pytest.mark.parametrize("text", ["G[3,1] p0", "p0 &", "(p0", "p0 p1", "q0", "G[0] p0", ""])
def test_parse_errors(text):
    with pytest.raises(FormulaSyntaxError) as e:
        parse_formula(text)
    assert e.value.pos >= 0


def test_parse_error_position():
    with pytest.raises(FormulaSyntaxError) as e:
        parse_formula("p0 & & p1")
    assert e.value.pos == 5


@given(formulas(P=3))
def test_print_parse_roundtrip(phi):
    assert parse_formula(to_text(phi)) == phi


def test_all_specs_parse():
    for s in SPECS.values():
        phi = s.formula
        assert max(predicates(phi)) < s.P


# --- bounds --------------------------------------------------------------


def test_bounds_examples():
    s01 = parse_formula("G[0,3](p1 U[0,3] p0)")
    assert (state_complexity(s01), depth_bound(s01), horizon(s01)) == (12, 4, 6)
    u = parse_formula("p1 U[0,5] p0")
    assert (state_complexity(u), depth_bound(u), horizon(u)) == (12, 3, 5)
    p = parse_formula("p0")
    assert (state_complexity(p), depth_bound(p), horizon(p)) == (0, 0, 0)
    assert horizon(parse_formula("G[0,5] p0")) == 5


def test_table_state_column():
    assert [state_complexity(SPECS[k].formula) for k in sorted(SPECS)] == [12, 11, 11, 11, 15, 11]


def test_or_counts_like_and():
    assert state_complexity(parse_formula("G[0,2] p0 | F[0,3] p1")) == state_complexity(
        parse_formula("G[0,2] p0 & F[0,3] p1")
    )


@given(formulas(), formulas())
def test_state_complexity_additive(f, g):
    assert state_complexity(And(f, g)) == state_complexity(f) + state_complexity(g)


# --- robustness ----------------------------------------------------------


def test_oracle_examples():
    x = np.array([[0.5, -0.2, 0.9, 0.1]])
    assert robustness_oracle(Pred(0), x, 0) == 0.5
    assert robustness_oracle(Not(Pred(0)), x, 0) == -0.5
    assert robustness_oracle(parse_formula("G[0,2] p0"), x, 0) == -0.2
    with pytest.raises(ValueError):
        robustness_oracle(Pred(0), x, 4)


def test_window_clamping():
    x = np.array([[0.1, 0.2, 0.3, 0.4]])
    r = robustness_trace(parse_formula("F[5,7] p0"), x)
    np.testing.assert_allclose(r, [0.4] * 4)
    r = robustness_trace(parse_formula("G[0,2] p0"), x)
    np.testing.assert_allclose(r, [0.1, 0.2, 0.3, 0.4])


@given(formulas(), signal(2, 5))
def test_vectorized_matches_scalar_oracle(phi, x):
    r = robustness_trace(phi, x)
    for t in range(5):
        assert r[t] == pytest.approx(rho(phi, x, t))


@given(formulas(), st.lists(signal(2, 4), min_size=3, max_size=3))
def test_batched_matches_single(phi, xs):
    X = np.stack(xs)
    R = robustness_trace(phi, X)
    for i in range(3):
        np.testing.assert_allclose(R[i], robustness_trace(phi, xs[i]))


# --- causal monitor ------------------------------------------------------


def test_causal_examples():
    x = np.array([[0.3, -0.7]])
    iv = robustness_causal(Pred(0), x, 1)
    assert iv.lo == iv.hi == -0.7
    x = np.array([[0.4, 0.8, -0.3]])
    iv = robustness_causal(parse_formula("G[0,5] p0"), x, 2)
    assert robustness_causal(parse_formula("G[0,5] p0"), x[:, :2], 1).verdict() == 0
    assert iv.hi <= -0.3 and iv.verdict() == -1
    x = np.array([[-0.4, -0.3]])
    iv = robustness_causal(parse_formula("F[0,5] p0"), x, 1, total_length=10)
    assert iv.lo < 0 < iv.hi and iv.verdict() == 0
    with pytest.raises(ValueError):
        RobustnessInterval(1.0, 0.0)


@given(formulas(), signal(2, 6))
def test_causal_on_full_trace_equals_oracle(phi, x):
    r = robustness_trace(phi, x)
    # once every sample is observed the enclosure collapses to the oracle value
    iv = robustness_causal(phi, x, 5, total_length=6)
    assert iv.lo == iv.hi == pytest.approx(r[5])
    for t in range(6):
        iv = robustness_causal(phi, x[:, : t + 1], t, total_length=6)
        assert iv.lo <= r[t] <= iv.hi


@given(formulas(max_depth=2), signal(2, 4, values=(-1.0, 0.5, 1.0)), st.integers(0, 3))
def test_causal_interval_is_sound(phi, x, t):
    T = x.shape[1]
    grid = (-1.0, 0.0, 1.0)
    iv = robustness_causal(phi, x, t, total_length=T)
    n_free = 2 * (T - t - 1)
    for fill in itertools.product(grid, repeat=n_free):
        y = x.copy()
        y[:, t + 1 :] = np.array(fill).reshape(2, T - t - 1)
        v = rho(phi, y, t)
        assert iv.lo - 1e-12 <= v <= iv.hi + 1e-12


@given(formulas(), signal(2, 6))
def test_causal_verdicts_match_pointwise(phi, x):
    v = causal_verdicts(phi, x, 0.2)
    for t in range(6):
        assert v[t] == robustness_causal(phi, x, t, total_length=6).verdict(0.2)


# --- quantization and labels ----------------------------------------------


def test_quantize_examples():
    np.testing.assert_array_equal(quantize_signal([0.5, 0.1, -0.2, 0.2, -0.21], 0.2), [1, 0, 0, 0, -1])
    with pytest.raises(ValueError):
        quantize_signal([0.0], -0.1)


def test_qtc_examples():
    assert robustness_qtc(parse_formula("p0 & p1"), np.array([[1], [0]]), 0) == 0
    assert robustness_qtc(parse_formula("p0 | p1"), np.array([[0], [1]]), 0) == 1
    assert robustness_qtc(parse_formula("G[0,2] p0"), np.array([[1, 1, 1]]), 0) == 1


def test_ctq_thresholding():
    # p0 directly gives the robustness sequence
    x = np.array([[0.5, -0.01, -0.4]])
    np.testing.assert_array_equal(make_labels(Pred(0), x, LabelConfig("CtQ", 0.2)), [1, 0, -1])
    with pytest.raises(ValueError):
        LabelConfig("XtY")
    with pytest.raises(ValueError):
        LabelConfig("CtQ", 1.0)


@given(formulas(max_depth=3), signal(2, 8), st.sampled_from([0.0, 0.1, 0.2]))
def test_qtc_never_flips_sign(phi, x, delta):
    r = robustness_trace(phi, x)
    q = make_labels(phi, x, LabelConfig("QtC", delta))
    assert np.all(np.sign(r) * q >= 0)


def test_paired_pipelines_random(rng):
    phi = SPECS["S02"].formula
    for _ in range(100):
        x = rng.uniform(-1, 1, (3, 12))
        ctq = make_labels(phi, x, LabelConfig("CtQ", 0.0))
        qtc = make_labels(phi, x, LabelConfig("QtC", 0.2))
        assert np.all(ctq * qtc >= 0)


@given(formulas(max_depth=3), signal(2, 6), st.sampled_from([0.0, 0.2]))
def test_shared_dead_band_pipelines_agree(phi, x, delta):
    # quantization is monotone and odd, so it commutes with min, max and negation
    np.testing.assert_array_equal(
        make_labels(phi, x, LabelConfig("CtQ", delta)), make_labels(phi, x, LabelConfig("QtC", delta))
    )
