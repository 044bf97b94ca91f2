from __future__ import annotations

from hypothesis import given, strategies as st

from mathinterp.text import is_math_token, math_token_count, nesting_depth, normalize_whitespace, tokenize


def test_tokenize_keeps_symbols_with_words():
    assert tokenize("The Gradient is ∇f.") == ("the", "gradient", "is", "∇f")


def test_tokenize_keeps_equations_whole():
    assert tokenize("f(x)=x^2, so f(2)=4") == ("f(x)=x^2", "so", "f(2)=4")


def test_tokenize_empty():
    assert tokenize("") == ()
    assert tokenize("   \n\t") == ()


def test_tokenize_coordinate_tuple_and_decimal():
    assert "(-1,4)" in tokenize("at the point (-1, 4) today")
    assert "3.14" in tokenize("pi is about 3.14.")


def test_math_token_helpers():
    assert is_math_token("x^2")
    assert is_math_token("f(x)")
    assert not is_math_token("gradient")
    assert math_token_count("So the answer is 5.") == 1
    assert nesting_depth("sqrt((a+b)^2)") == 2
    assert nesting_depth("no brackets") == 0


def test_normalize_whitespace():
    assert normalize_whitespace("  Find   the  gradient ,  now .") == "Find the gradient, now."


@given(st.text(max_size=80))
def test_tokens_are_nonempty_and_lowercase(text):
    tokens = tokenize(text)
    assert all(tokens)
    assert all(t == t.lower() for t in tokens)
    assert tokenize(text) == tokens


@given(st.text(alphabet="abcxyz0123456789 ()^=+-*/.,∇", max_size=60))
def test_tokenize_join_is_fixed_point(text):
    once = tokenize(text)
    assert tokenize(" ".join(once)) == once
