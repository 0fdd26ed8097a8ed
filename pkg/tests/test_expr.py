import numpy as np
import numpy.testing as npt
import pytest
from hypothesis import given
from hypothesis import strategies as st

from collective_lp.expr import (
    BinOp,
    Call,
    DomainError,
    ExpressionSyntaxError,
    Literal,
    Neg,
    UnknownIdentifier,
    Variable,
    evaluate,
    grad,
    hamiltonian,
    parse,
    to_text,
)
from collective_lp.hamiltonians import rigid_body


@pytest.mark.parametrize(
    "text, w, value",
    [
        ("w1 + w2*w3", (1, 2, 3), 7.0),
        ("-w1^2", (3, 0, 0), -9.0),
        ("2^3^2", (0, 0, 0), 512.0),
        ("8/4/2", (0, 0, 0), 1.0),
        ("1 - 2 - 3", (0, 0, 0), -4.0),
        ("(w1 + w2) * w3", (1, 2, 3), 9.0),
        ("sqrt(w1) + ln(exp(w2))", (4, 1.5, 0), 3.5),
        ("abs(-w3) + cos(0) + sin(0)", (0, 0, 2), 3.0),
        (".5e1 + 1.25E-2", (0, 0, 0), 5.0125),
        ("w1^-1", (4, 0, 0), 0.25),
        ("w1^0.5", (9, 0, 0), 3.0),
        ("(-w1)^3", (2, 0, 0), -8.0),
    ],
)
def test_evaluate_examples(text, w, value):
    assert evaluate(parse(text), np.array(w, dtype=float)) == pytest.approx(value, rel=1e-15)


def test_parse_tree_shape():
    assert parse("w1 + w2*w3") == BinOp("+", Variable("w1"), BinOp("*", Variable("w2"), Variable("w3")))
    assert parse("-w1^2") == Neg(BinOp("^", Variable("w1"), Literal(2.0)))
    assert parse("2^3^2") == BinOp("^", Literal(2.0), BinOp("^", Literal(3.0), Literal(2.0)))


@pytest.mark.parametrize("text, offset", [("w1 +", 4), ("", 0), ("(w1", 3), ("w1 w2", 3), ("w1 $ 2", 3), ("sin w1", 4)])
def test_syntax_errors(text, offset):
    with pytest.raises(ExpressionSyntaxError) as err:
        parse(text)
    assert err.value.offset == offset


def test_offset_counts_bytes():
    with pytest.raises(ExpressionSyntaxError) as err:
        parse("é + ")
    assert err.value.offset == 0
    with pytest.raises(ExpressionSyntaxError) as err:
        parse("w1 + é")
    assert err.value.offset == 5


@pytest.mark.parametrize("text", ["w4 + 1", "x", "tan(w1)", "pi*w1"])
def test_unknown_identifier(text):
    with pytest.raises(UnknownIdentifier):
        parse(text)


@pytest.mark.parametrize(
    "text, w",
    [
        ("1/w1", (0, 1, 1)),
        ("ln(w1)", (0, 1, 1)),
        ("ln(w1)", (-1, 1, 1)),
        ("sqrt(w2)", (1, -1, 1)),
        ("w1^0.5", (-1, 0, 0)),
        ("w1^-2", (0, 0, 0)),
        ("w1^w2", (0, 1, 0)),
    ],
)
def test_domain_errors(text, w):
    with pytest.raises(DomainError):
        evaluate(parse(text), np.array(w, dtype=float))


def test_gradient_example():
    node = parse("w1*w2^2*w3 / 6 + ln(w1)")
    # d/dw1 = w2^2 w3/6 + 1/w1, d/dw2 = w1 w2 w3/3, d/dw3 = w1 w2^2/6 at (1,2,3)
    npt.assert_allclose(grad(node, np.array([1.0, 2, 3])), [3.0, 2.0, 2 / 3], rtol=1e-15)
    npt.assert_allclose(grad(parse("w1^2/3 + w2^2 + w3^2"), [1.0, 1.0, 3.0]), [2 / 3, 2, 6], rtol=1e-15)


def test_gradient_of_constant_is_zero():
    npt.assert_array_equal(grad(parse("3 + 4*2"), np.ones((5, 3))), np.zeros((5, 3)))


def test_batched_evaluation():
    node = parse("w1*w2 - sin(w3)")
    W = np.random.default_rng(0).normal(size=(4, 7, 3))
    vals = evaluate(node, W)
    assert vals.shape == (4, 7)
    npt.assert_allclose(vals[2, 5], evaluate(node, W[2, 5]))
    assert grad(node, W).shape == (4, 7, 3)


def test_rigid_body_expression_matches_builtin():
    H = hamiltonian("0.5*(w1^2/1.5 + w2^2/1 + w3^2/0.5)")
    ref = rigid_body(1.5, 1.0, 0.5)
    W = np.random.default_rng(1).normal(size=(100, 3))
    assert np.max(np.abs(H(W) - ref(W))) < 1e-14
    assert np.max(np.abs(H.gradient(W) - ref.gradient(W))) < 1e-14


@pytest.mark.parametrize(
    "text",
    ["w1*w2^2*w3 + exp(w1)", "sin(w1)*cos(w2) - w3^3", "sqrt(w1^2 + w2^2 + 1) / (2 + w3^2)", "w1^w2", "abs(w1 - w3)"],
)
def test_gradient_matches_finite_differences(text):
    node = parse(text)
    rng = np.random.default_rng(2)
    for _ in range(20):
        w = rng.uniform(0.2, 1.5, 3)
        fd = np.array([(evaluate(node, w + e) - evaluate(node, w - e)) / 2e-6 for e in 1e-6 * np.eye(3)])
        npt.assert_allclose(grad(node, w), fd, atol=1e-7)


leaves = st.one_of(
    st.builds(Literal, st.floats(0, 1e6, allow_nan=False)),
    st.sampled_from([Variable(v) for v in ("w1", "w2", "w3")]),
)
trees = st.recursive(
    leaves,
    lambda inner: st.one_of(
        st.builds(Neg, inner),
        st.builds(BinOp, st.sampled_from("+-*/^"), inner, inner),
        st.builds(Call, st.sampled_from(["sin", "cos", "exp", "ln", "sqrt", "abs"]), inner),
    ),
    max_leaves=12,
)


@given(trees)
def test_text_round_trip(node):
    assert parse(to_text(node)) == node
