"""Directive scanner and block-tree tests."""

import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from featrace.conditions import Compare, DefinedTest, IntLiteral, MacroRef, Not
from featrace.preproc import (
    Branch,
    DirectiveKind,
    build_macro_table,
    count_lines,
    scan_file,
    strip_comments_and_strings,
)

FIG_EXAMPLE = """#ifdef A
    #define B 15
#endif

#if C
    #if B > 10
       run();
    #endif
#endif

#ifndef D
       run();
#endif

run();"""


def test_fifteen_line_example_directives_and_tree():
    r = scan_file("f.c", FIG_EXAMPLE)
    assert r.line_count == 15
    assert [d.line for d in r.directives] == [1, 2, 3, 5, 6, 8, 9, 11, 13]
    assert not r.issues

    root = r.root
    assert root.branch == Branch.FILE_ROOT
    assert root.span == (1, 15)
    a, c, d = root.children
    assert (a.guard, a.span) == (DefinedTest("A"), (2, 2))
    assert (c.guard, c.span) == (MacroRef("C"), (6, 8))
    assert (d.guard, d.span) == (Not(DefinedTest("D")), (12, 12))
    (inner,) = c.children
    assert inner.guard == Compare(MacroRef("B"), ">", IntLiteral(10))
    assert inner.span == (7, 7)


def test_empty_file():
    r = scan_file("f.c", "")
    assert r.directives == []
    assert r.root.span == (1, 0)
    assert r.line_count == 0


def test_elif_else_group_hand_built():
    text = "\n".join([
        "#if A",        # 1
        "one();",       # 2
        "#elif B",      # 3
        "two();",       # 4
        "#else",        # 5
        "three();",     # 6
        "#endif",       # 7
    ])
    r = scan_file("f.c", text)
    (head,) = r.root.children
    assert head.branch == Branch.IF_BRANCH
    assert head.guard == MacroRef("A")
    assert head.span == (2, 2)
    assert (head.lines_from, head.lines_to) == (1, 2)
    elif_b, else_b = head.siblings
    assert elif_b.branch == Branch.ELIF_BRANCH
    assert elif_b.guard == MacroRef("B")
    assert elif_b.span == (4, 4)
    assert (elif_b.lines_from, elif_b.lines_to) == (3, 4)
    assert else_b.branch == Branch.ELSE_BRANCH
    assert else_b.guard is None
    assert else_b.span == (6, 6)
    assert (else_b.lines_from, else_b.lines_to) == (5, 7)
    spans = [head.span, elif_b.span, else_b.span]
    for i, s in enumerate(spans):
        for t in spans[i + 1:]:
            assert s[1] < t[0] or t[1] < s[0]  # pairwise disjoint


def test_continuation_lines_report_first_physical_line():
    text = "#if A && \\\n    B\nbody();\n#endif\n"
    r = scan_file("f.c", text)
    d = r.directives[0]
    assert d.line == 1
    assert d.raw == "#if A &&     B"
    assert macroset(d.expr) == {"A", "B"}


def macroset(expr):
    from featrace.conditions import macro_names
    return macro_names(expr)


def test_directives_in_comments_and_strings_excluded():
    text = "\n".join([
        "/* #ifdef FAKE */",
        "const char *s = \"#if NOPE\";",
        "// #endif",
        "#ifdef REAL",
        "x();",
        "#endif",
    ])
    r = scan_file("f.c", text)
    assert [d.kind for d in r.directives] == [DirectiveKind.IFDEF, DirectiveKind.ENDIF]
    assert r.directives[0].name == "REAL"


def test_block_comment_spanning_lines_hides_directives():
    text = "/*\n#ifdef GHOST\n*/\nint x;\n"
    r = scan_file("f.c", text)
    assert r.directives == []


def test_unbalanced_endif_degrades_to_file_root():
    text = "#endif\nint x;\n"
    r = scan_file("f.c", text)
    assert r.root.children == []
    assert r.issues and r.issues[0].kind == "unbalanced-conditional"
    assert r.issues[0].line == 1


def test_missing_endif_degrades_to_file_root():
    text = "#ifdef A\nint x;\n"
    r = scan_file("f.c", text)
    assert r.root.children == []
    assert r.issues and r.issues[0].kind == "unbalanced-conditional"


def test_unsupported_expression_marks_block():
    text = "#if CHECK(1)\nx();\n#endif\n"
    r = scan_file("f.c", text)
    assert r.issues and r.issues[0].kind == "unsupported-expression"
    assert r.issues[0].token == "CHECK("
    (block,) = r.root.children
    assert block.unsupported


def test_latin1_bytes_never_abort():
    data = "#ifdef A\n// caf\xe9\n#endif\n".encode("latin-1")
    r = scan_file("f.c", data)
    assert [d.kind for d in r.directives] == [DirectiveKind.IFDEF, DirectiveKind.ENDIF]


def test_macro_table_fig_example():
    r = scan_file("f.c", FIG_EXAMPLE)
    table = build_macro_table([r])
    assert set(table.events) == {"B"}
    (event,) = table.events["B"]
    assert (event.file, event.line, event.value, event.kind) == ("f.c", 2, "15", "define")


def test_macro_table_empty():
    r = scan_file("f.c", "int x;\n")
    assert build_macro_table([r]).events == {}


def test_macro_table_define_then_undef_order():
    r = scan_file("f.c", "#define X 1\n#undef X\n")
    table = build_macro_table([r])
    kinds = [e.kind for e in table.events["X"]]
    assert kinds == ["define", "undef"]


def test_define_without_value_and_function_like():
    r = scan_file("f.c", "#define FLAG\n#define MAX(a, b) ((a) > (b) ? (a) : (b))\n")
    table = build_macro_table([r])
    assert table.events["FLAG"][0].value is None
    assert table.events["MAX"][0].value == "(a, b) ((a) > (b) ? (a) : (b))"


# -- properties ---------------------------------------------------------------


def _top_level_partition(r):
    """Each line must fall in exactly one of: a top-level branch range,
    or the leftover file-root region."""
    claimed = {}
    for head in r.root.children:
        for branch in [head] + head.siblings:
            for ln in range(branch.lines_from, branch.lines_to + 1):
                assert ln not in claimed, f"line {ln} claimed twice"
                claimed[ln] = branch
    for ln in range(1, r.line_count + 1):
        assert ln in claimed or True  # leftover lines belong to the root
    return claimed


def _random_skeleton(rng, max_lines=24):
    lines = []
    depth = 0
    while len(lines) < max_lines:
        roll = rng.random()
        if roll < 0.25:
            lines.append(f"#ifdef M{rng.randint(0, 5)}")
            depth += 1
        elif roll < 0.35 and depth:
            lines.append("#else" if rng.random() < 0.5 else f"#elif M{rng.randint(0, 5)}")
        elif roll < 0.55 and depth:
            lines.append("#endif")
            depth -= 1
        else:
            lines.append(f"stmt_{len(lines)}();")
    while depth:
        lines.append("#endif")
        depth -= 1
    return "\n".join(lines)


def _well_nested(node):
    groups = []
    for head in node.children:
        branches = [head] + head.siblings
        for i, br in enumerate(branches):
            assert br.lines_from <= br.lines_to + 1  # empty branches allowed
            assert br.span[0] == br.lines_from + 1
            if i + 1 < len(branches):
                assert branches[i + 1].lines_from == br.lines_to + 1
            for child in [head] + head.siblings:
                pass
        groups.append(branches)
        for br in branches:
            for child in br.children:
                assert br.span[0] <= child.lines_from
                assert child.lines_to <= br.span[1] + 1  # child may own the same endif? no:
                assert child.lines_to <= br.span[1]
            _well_nested(br)
    return True


def test_fuzz_block_trees_well_nested():
    # large-volume fuzz; plain random loop keeps it fast and reproducible
    rng = random.Random(0xFEA7)
    for i in range(10_000):
        text = _random_skeleton(rng)
        r = scan_file(f"fuzz{i}.c", text)
        assert not r.issues, text
        _well_nested(r.root)
        _top_level_partition(r)


@given(st.integers(0, 2**32 - 1))
@settings(max_examples=60, deadline=None)
def test_comment_insertion_changes_no_directive_output(seed):
    rng = random.Random(seed)
    text = _random_skeleton(rng, max_lines=14)
    base = scan_file("f.c", text)
    lines = text.split("\n")
    idx = rng.randrange(len(lines))
    lines[idx] = lines[idx] + " /* #ifdef FAKE */"
    mutated = scan_file("f.c", "\n".join(lines))
    assert [(d.kind, d.line, d.raw) for d in base.directives] == \
           [(d.kind, d.line, d.raw) for d in mutated.directives]


def test_round_trip_partition_fig_example():
    r = scan_file("f.c", FIG_EXAMPLE)
    claimed = _top_level_partition(r)
    # every line is exactly one of: inside a top-level group range, or plain
    top_level = set(claimed)
    leftovers = set(range(1, r.line_count + 1)) - top_level
    assert leftovers == {4, 10, 14, 15}
    assert len(top_level) + len(leftovers) == r.line_count


def test_count_lines_conventions():
    assert count_lines("") == 0
    assert count_lines("a") == 1
    assert count_lines("a\n") == 1
    assert count_lines("a\nb") == 2
    assert count_lines("\n") == 1


def test_strip_preserves_length_and_lines():
    text = "int a; /* hey\nthere */ char *s = \"x\\\"y\";\n// tail\n"
    stripped = strip_comments_and_strings(text)
    assert len(stripped) == len(text)
    assert stripped.count("\n") == text.count("\n")
    assert '"' in stripped           # delimiters survive
    assert "hey" not in stripped
    assert "tail" not in stripped
    assert "x" not in stripped.split("\n")[1]
