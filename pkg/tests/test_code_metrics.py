import io

import pytest
from hypothesis import given
from hypothesis import strategies as st

from decaymap.code_metrics import (
    DEFAULT_LANGUAGES,
    PYTHON,
    count_sloc,
    cyclomatic,
    language_for,
    load_language_config,
    measure,
    measure_tree,
    scan,
)

C = DEFAULT_LANGUAGES[".c"]


def test_sloc_empty():
    assert count_sloc("", C) == 0


def test_sloc_code_blank_and_line_comment():
    text = "int a;\n\nint b;\n// note\n\nint c;\n"
    assert count_sloc(text, C) == 3


def test_sloc_block_comment_spanning_lines():
    text = "/* one\n   two\n   three\n   four */\nint a;\nint b;\n"
    assert count_sloc(text, C) == 2


def test_sloc_code_before_and_after_comment_counts():
    text = "int a; /* start\n middle\n end */ int b;\n"
    assert count_sloc(text, C) == 2


def test_comment_marker_inside_string_is_code():
    text = 'char *s = "/* not a comment";\nint x;\n'
    assert count_sloc(text, C) == 2


def test_undecodable_bytes_counted_and_flagged():
    data = b"int a;\n\xff\xfe garbage\n// c\n"
    m = measure(data, C)
    assert m.sloc == 2 and m.undecodable


def test_ccn_base_case():
    assert cyclomatic("int f(void) {\n  return 1;\n}\n", C) == 1


def test_ccn_single_if():
    assert cyclomatic("int f(int x) {\n  if (x) return 1;\n  return 0;\n}\n", C) == 2


FIXTURE_SIX = """\
int f(int x) {
    if (x > 0) {
        return 1;
    }
    if (x < -5) return 2;
    return 0;
}

static void g(int *p, int n) {
    while (n--) {
        if (p[n]) p[n] = 0;
    }
}
"""


def test_ccn_two_functions_three_ifs_one_while():
    assert cyclomatic(FIXTURE_SIX, C) == 6


def test_ccn_ignores_comments_and_strings():
    text = 'int f(void) {\n  /* if while */ // for\n  puts("if && ||");\n  return 0;\n}\n'
    assert cyclomatic(text, C) == 1


def test_ccn_empty_and_functionless():
    assert cyclomatic("", C) == 0
    assert cyclomatic("// only comment\n", C) == 0
    assert cyclomatic("int x = 1;\n", C) == 1


def test_ccn_python():
    text = 'def f(x):\n    """if in docstring"""\n    if x and x > 1:\n        return 1\n    return 0\n\ndef g():\n    pass\n'
    assert cyclomatic(text, PYTHON) == 2 + 2


def test_ccn_cpp_method_signatures():
    text = "int A::get() const {\n return v;\n}\nvoid B::set(int x) noexcept {\n if (x) v = x;\n}\n"
    assert cyclomatic(text, DEFAULT_LANGUAGES[".cpp"]) == 3


def test_ccn_counts_each_case():
    text = "int f(int x) {\n switch (x) {\n case 1: return 1;\n case 2: return 2;\n default: return 0;\n }\n}\n"
    assert cyclomatic(text, C) == 3


bodies = st.lists(st.sampled_from(["if (a) b();", "while (c) d();", "x = a && b;", "y = p ? q : r;", "z = 1;", "for (;;) break;"]), max_size=6)


def c_function(name, stmts):
    return f"int {name}(int a) {{\n" + "".join(f"    {s}\n" for s in stmts) + "    return a;\n}\n"


@given(bodies, bodies)
def test_ccn_additive_over_concatenation(b1, b2):
    f1, f2 = c_function("one", b1), c_function("two", b2)
    assert cyclomatic(f1 + f2, C) == cyclomatic(f1, C) + cyclomatic(f2, C)


@given(bodies, st.sampled_from(["if", "while", "for", "case", "&&", "||", "?"]))
def test_ccn_monotone_when_appending_branch(b, token):
    f = c_function("one", b)
    assert cyclomatic(f + f" {token} ", C) >= cyclomatic(f, C) >= 1


@given(st.text(alphabet="ab /*\n\"'", max_size=200))
def test_sloc_bounded_by_line_count(text):
    assert 0 <= count_sloc(text, C) <= len(text.splitlines())


def test_scan_collects_comments_with_line_numbers():
    s = scan("int a; // one\n/* two\n */\n", C)
    assert [ln for ln, _ in s.comments] == [1, 2]


def test_language_for_and_config_loading():
    assert language_for("x/y.PY").name == "python"
    assert language_for("README") is None
    cfg = load_language_config(io.StringIO("ext,comment_line,comment_open,comment_close,branch_tokens\nlua,--,--[[,]],if|while|for|and|or\n"))
    lua = cfg[".lua"]
    assert lua.comment_line == ("--",) and lua.branch_tokens == ("if", "while", "for", "and", "or")
    assert count_sloc("-- note\nx = 1\n--[[ a\nb ]]\n", lua) == 1
    assert ".c" in cfg


def test_measure_tree(tmp_path):
    (tmp_path / "src").mkdir()
    (tmp_path / "src" / "a.c").write_text(FIXTURE_SIX)
    (tmp_path / "src" / "b.py").write_text("def f():\n    return 1\n")
    (tmp_path / "notes.txt").write_text("if if if\n")
    tree = measure_tree(tmp_path)
    assert set(tree.files) == {"src/a.c", "src/b.py"}
    assert tree.files["src/a.c"].ccn == 6 and tree.files["src/a.c"].sloc == 12
    assert tree.files["src/b.py"].language == "python"


@pytest.mark.parametrize("ext", [".java", ".js", ".ts", ".cs", ".go", ".rs", ".kt", ".swift", ".php"])
def test_other_languages_have_a_function(ext):
    src = {
        ".go": "func f(x int) int {\n if x > 0 { return 1 }\n return 0\n}\n",
        ".rs": "fn f(x: i32) -> i32 {\n if x > 0 { 1 } else { 0 }\n}\n",
    }.get(ext, "int f(int x) {\n if (x > 0) { return 1; }\n return 0;\n}\n")
    assert cyclomatic(src, DEFAULT_LANGUAGES[ext]) == 2
