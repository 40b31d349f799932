"""Condition grammar tests, including the table-driven oracle parser the
main recursive-descent parser is checked against."""

import random

import pytest

from featrace.conditions import (
    And,
    Arith,
    Compare,
    DefinedTest,
    IntLiteral,
    MacroRef,
    Not,
    Or,
    UnsupportedExpression,
    evaluate,
    macro_names,
    parse_condition,
    positive_macro_order,
    render,
)


def test_fig_comparison_example():
    assert parse_condition("B > 10") == Compare(MacroRef("B"), ">", IntLiteral(10))


def test_defined_and_negation():
    assert parse_condition("defined(A) && !defined(B)") == And(
        DefinedTest("A"), Not(DefinedTest("B")))


def test_defined_without_parens():
    assert parse_condition("defined X") == DefinedTest("X")


def test_bare_identifier_is_macro_ref():
    assert parse_condition("FOO") == MacroRef("FOO")


def test_precedence_not_over_arith_over_compare_over_and_over_or():
    got = parse_condition("!A && B + 1 > 2 || C")
    expected = Or(And(Not(MacroRef("A")),
                      Compare(Arith(MacroRef("B"), "+", IntLiteral(1)), ">", IntLiteral(2))),
                  MacroRef("C"))
    assert got == expected


def test_relational_binds_tighter_than_equality():
    got = parse_condition("A == B < C")
    assert got == Compare(MacroRef("A"), "==", Compare(MacroRef("B"), "<", MacroRef("C")))


def test_mul_binds_tighter_than_add():
    got = parse_condition("A + B * 2")
    assert got == Arith(MacroRef("A"), "+", Arith(MacroRef("B"), "*", IntLiteral(2)))


def test_parens_override():
    got = parse_condition("(A + 2) * 3 >= Y || defined Z")
    expected = Or(Compare(Arith(Arith(MacroRef("A"), "+", IntLiteral(2)), "*", IntLiteral(3)),
                          ">=", MacroRef("Y")),
                  DefinedTest("Z"))
    assert got == expected


def test_hex_and_suffixed_literals():
    assert parse_condition("0x10 == 16") == Compare(IntLiteral(16), "==", IntLiteral(16))
    assert parse_condition("2L > 1U") == Compare(IntLiteral(2), ">", IntLiteral(1))


def test_unary_minus_folds_into_literal():
    assert parse_condition("X > -1") == Compare(MacroRef("X"), ">", IntLiteral(-1))


@pytest.mark.parametrize("bad", [
    "FOO(1)", "A ? B : C", "A & B", "A | B", "A << 2", "A % 2", "~A",
    "", "defined", "defined()", "1 +", "(A", "A))",
])
def test_out_of_grammar_raises(bad):
    with pytest.raises(UnsupportedExpression):
        parse_condition(bad)


def test_macro_names_and_positivity():
    expr = parse_condition("defined(A) && !defined(B) || C > 3")
    assert macro_names(expr) == {"A", "B", "C"}
    assert positive_macro_order(expr) == ("A", "C")


def test_evaluate_c_semantics():
    expr = parse_condition("X > 10 && defined(Y)")
    assert evaluate(expr, {"X": 15, "Y": 1}) == 1
    assert evaluate(expr, {"X": 15, "Y": None}) == 0
    assert evaluate(expr, {"X": None, "Y": 1}) == 0  # undefined is 0


def test_evaluate_division_truncates_toward_zero():
    assert evaluate(parse_condition("0 - 7"), {}) == -7
    assert evaluate(Arith(IntLiteral(-7), "/", IntLiteral(2)), {}) == -3


def test_evaluate_short_circuit_skips_division_by_zero():
    expr = parse_condition("0 && 1 / 0")
    assert evaluate(expr, {}) == 0
    with pytest.raises(ZeroDivisionError):
        evaluate(parse_condition("1 / 0"), {})


# -- oracle comparison --------------------------------------------------------
#
# An independent precedence-climbing parser driven purely by a table of
# binding powers.  Any disagreement with the recursive-descent parser over
# random inputs is a bug in one of them.

_BINDING = {"||": 1, "&&": 2, "==": 3, "!=": 3,
            "<": 4, "<=": 4, ">": 4, ">=": 4,
            "+": 5, "-": 5, "*": 6, "/": 6}


def _oracle_tokens(text):
    import re
    pattern = re.compile(r"\s*(\d+|[A-Za-z_]\w*|<=|>=|==|!=|&&|\|\||[!()<>+*/-])")
    pos, out = 0, []
    while pos < len(text):
        m = pattern.match(text, pos)
        assert m, f"oracle cannot lex {text[pos:]!r}"
        out.append(m.group(1))
        pos = m.end()
    return out


def _oracle_parse(tokens, min_bp=0):
    tok = tokens.pop(0)
    if tok == "(":
        left = _oracle_parse(tokens, 0)
        assert tokens.pop(0) == ")"
    elif tok == "!":
        left = Not(_oracle_parse_unary(tokens))
    elif tok == "defined":
        if tokens and tokens[0] == "(":
            tokens.pop(0)
            left = DefinedTest(tokens.pop(0))
            assert tokens.pop(0) == ")"
        else:
            left = DefinedTest(tokens.pop(0))
    elif tok.isdigit():
        left = IntLiteral(int(tok))
    else:
        left = MacroRef(tok)
    while tokens and tokens[0] in _BINDING and _BINDING[tokens[0]] >= min_bp:
        op = tokens.pop(0)
        right = _oracle_parse(tokens, _BINDING[op] + 1)
        if op in ("&&",):
            left = And(left, right)
        elif op in ("||",):
            left = Or(left, right)
        elif op in ("+", "-", "*", "/"):
            left = Arith(left, op, right)
        else:
            left = Compare(left, op, right)
    return left


def _oracle_parse_unary(tokens):
    # unary ! binds tighter than any binary operator
    tok = tokens[0]
    if tok == "!":
        tokens.pop(0)
        return Not(_oracle_parse_unary(tokens))
    if tok == "(":
        tokens.pop(0)
        node = _oracle_parse(tokens, 0)
        assert tokens.pop(0) == ")"
        return node
    if tok == "defined":
        tokens.pop(0)
        if tokens and tokens[0] == "(":
            tokens.pop(0)
            node = DefinedTest(tokens.pop(0))
            assert tokens.pop(0) == ")"
            return node
        return DefinedTest(tokens.pop(0))
    tokens.pop(0)
    return IntLiteral(int(tok)) if tok.isdigit() else MacroRef(tok)


def _random_expr_text(rng, depth=0):
    choices = ["leaf"] if depth >= 4 else ["leaf", "not", "binary", "binary", "paren"]
    kind = rng.choice(choices)
    if kind == "leaf":
        return rng.choice(["A", "B", "C", "X2", str(rng.randint(0, 30)),
                           "defined(A)", "defined B"])
    if kind == "not":
        inner = _random_expr_text(rng, depth + 1)
        return f"!({inner})"
    if kind == "paren":
        return f"({_random_expr_text(rng, depth + 1)})"
    op = rng.choice(["&&", "||", "==", "!=", "<", "<=", ">", ">=", "+", "-", "*", "/"])
    return (f"{_random_expr_text(rng, depth + 1)} {op} "
            f"{_random_expr_text(rng, depth + 1)}")


def test_parser_agrees_with_table_driven_oracle():
    rng = random.Random(20240917)
    for _ in range(50):
        text = _random_expr_text(rng)
        assert parse_condition(text) == _oracle_parse(_oracle_tokens(text)), text


def test_render_round_trips_through_parser():
    rng = random.Random(7)
    for _ in range(50):
        expr = parse_condition(_random_expr_text(rng))
        assert parse_condition(render(expr)) == expr
