import io

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from builders import commit
from decaymap.classifier import (
    CATEGORIES,
    Classifier,
    classify_message,
    corpus_report,
    count_satd,
    load_patterns,
    report_json,
    satd_scan,
)
from decaymap.code_metrics import DEFAULT_LANGUAGES

C = DEFAULT_LANGUAGES[".c"]


def cats(title, tags=()):
    return {lab.category for lab in classify_message(title, tags)}


def titled(*titles):
    return [commit(f"c{i}", i + 1, title=t) for i, t in enumerate(titles)]


@pytest.mark.parametrize(
    "title,expected",
    [
        ("Remove unneeded config flag", {"removal"}),
        ("Add deleted code back for rollout", set()),
        ("Implement new login flow", set()),
        ("BE: clean up dead handlers", {"better_engineering", "cleanup", "dead_code"}),
    ],
)
def test_message_examples(title, expected):
    assert cats(title) == expected


def test_whole_word_and_inflections():
    assert cats("Refactoring the parser") == {"refactor"}
    assert cats("cleanup of imports") == {"cleanup"}
    assert cats("Deleting stale rows") == {"removal"}
    assert cats("Reworked retries") == {"refactor"}
    assert cats("undead monsters") == set()
    assert cats("cleaner output") == {"cleanup"}


def test_case_rules():
    assert cats("REMOVE flag") == {"removal"}
    assert cats("be careful with cache") == set()
    assert cats("Better-Engineering week") == {"better_engineering"}


def test_tags_count_and_labels_carry_source():
    labels = classify_message("Ship feature", ["cleanup"])
    assert {(lab.category, lab.source) for lab in labels} == {("cleanup", "tag")}


def test_negative_only_suppresses_its_own_words():
    assert cats("add deleted code and remove the flag") == {"removal"}


def test_custom_pattern_csv():
    pats = load_patterns(io.StringIO("category,pattern,polarity\nperf,speed up,positive\nperf,speed up tests,negative\n"))
    clf = Classifier(pats)
    assert {lab.category for lab in clf.classify("Speed up startup")} == {"perf"}
    assert clf.classify("speed up tests") == frozenset()
    with pytest.raises(ValueError):
        load_patterns(io.StringIO("category,pattern,polarity\nx,y,maybe\n"))


def test_report_fixture():
    corpus = titled("remove a", "delete b", "remove c and clean", *["feature"] * 7)
    r = corpus_report(corpus)
    assert r.percentages["removal"] == pytest.approx(30)
    assert r.percentages["cleanup"] == pytest.approx(10)
    assert r.union_pct == pytest.approx(30)
    assert r.union_pct < r.sum_pct


def test_report_all_zero():
    r = corpus_report(titled("feature", "new api"))
    assert all(v == 0 for v in r.percentages.values()) and r.union_pct == 0


def test_report_disjoint_union_equals_sum():
    r = corpus_report(titled("remove x", "refactor y", "dead z", "clean w"))
    assert r.union_pct == pytest.approx(r.sum_pct) == pytest.approx(100)
    assert "disjoint" in r.overlap_note


def test_report_empty_corpus():
    with pytest.raises(ValueError):
        corpus_report([])


def test_report_json_and_table():
    r = corpus_report(titled("remove x", "feature"))
    assert '"union_percent": 50.0' in report_json(r)
    assert set(r.to_json()["counts"]) == set(CATEGORIES)
    assert "any category" in r.table()


words = st.sampled_from(["remove", "clean", "BE", "dead", "refactor", "feature", "fix", "code", "add", "deleted", "login"])
titles = st.lists(words, min_size=1, max_size=6).map(" ".join)


@settings(max_examples=60, deadline=None)
@given(st.lists(titles, min_size=1, max_size=40), st.randoms(use_true_random=False))
def test_union_bounded_and_order_independent(ts, rnd):
    corpus = titled(*ts)
    r = corpus_report(corpus)
    assert r.union_pct <= r.sum_pct + 1e-9 and r.union_pct <= 100
    multi = any(len(cats(t)) > 1 for t in ts)
    assert (r.union_pct < r.sum_pct - 1e-9) == multi
    shuffled = list(corpus)
    rnd.shuffle(shuffled)
    assert corpus_report(shuffled).to_json() == r.to_json()
    assert all(classify_message(t) == classify_message(t) for t in ts)


# -- SATD ---------------------------------------------------------------------------


def test_satd_todo_comment():
    assert count_satd("int x; // TODO: fix later\n", C) == 1


def test_satd_string_only():
    assert count_satd('puts("todo");\n', C) == 0


def test_satd_whole_word_and_phrase():
    assert count_satd("// todos are fine\n/* temporary   fix */\n// Hack-around\n", C) == 1 + 1


def test_satd_tree(tmp_path):
    (tmp_path / "a.c").write_text("// FIXME one\nint a; /* hack */\n")
    (tmp_path / "b.c").write_text("int b;\n")
    (tmp_path / "c.py").write_text("x = 'workaround'\n")
    scan = satd_scan(tmp_path)
    assert [scan.counts[k] for k in ("a.c", "b.c", "c.py")] == [2, 0, 0]
    (tmp_path / "d.c").write_bytes(b"\xff\xfe// todo\n")
    assert satd_scan(tmp_path).unreadable == 1
