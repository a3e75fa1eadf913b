import io
import math
import random

import pytest

from builders import commit, touching
from decaymap.graph import author_node, file_node
from decaymap.ingest import build_rename_chains
from decaymap.pipeline import Corpus, Settings
from decaymap.prioritizer import (
    COLUMNS,
    DAY,
    FileMetricsRow,
    UnknownColumnError,
    compute_file_metrics,
    export_table,
    geometric_mean,
    rank_files,
    read_table,
)
from decaymap.synthgen import ScenarioSpec, generate

T0 = 1_700_000_000


def metrics(commits, dat, **kw):
    m = build_rename_chains(commits)
    return compute_file_metrics(commits, m, dat, **kw), m


def by_path(table, path):
    return next(r for r in table.rows if r.current_path == path)


def test_avg_dat_is_geometric_mean():
    commits = [touching("c1", T0, ["a"]), touching("c2", T0 + 60, ["a"])]
    table, _ = metrics(commits, {"c1": math.e, "c2": math.e**3})
    row = by_path(table, "a")
    assert abs(row.avgDAT - math.e**2) < 1e-12
    assert row.totDAT == pytest.approx(math.e + math.e**3)


def test_norm_dat_splits_over_files():
    commits = [touching("c1", T0, ["a", "b", "c", "d", "e"])]
    table, _ = metrics(commits, {"c1": 10.0})
    for r in table.rows:
        assert r.totNormDAT == 2.0 and r.avgNormDAT == pytest.approx(2.0, abs=1e-12)
        assert r.nFilePerDiff == 5


def test_top_cochanged_threshold():
    sets = [["A", "B"]] * 3 + [["A", "C"]] + [["A"]] * 6
    commits = [touching(f"c{i}", T0 + i, s) for i, s in enumerate(sets)]
    table, _ = metrics(commits, {c.commit_id: 5.0 for c in commits})
    assert by_path(table, "A").topCochanged == [("B", 0.30)]
    assert by_path(table, "C").topCochanged == [("A", 1.0)]


def test_top_cochanged_skips_large_commits():
    commits = [touching("c1", T0, ["a", "b", "c"]), touching("c2", T0 + 1, ["a"])]
    table, _ = metrics(commits, {"c1": 5.0, "c2": 5.0}, max_files=2)
    assert by_path(table, "a").topCochanged == []


def test_window_author_and_outage_columns():
    old = T0 - 800 * DAY
    commits = [
        touching("c0", old, ["a"], author="zed"),
        touching("c1", T0, ["a"], author="amy", outage=3),
        touching("c2", T0 + 40 * DAY, ["a"], author="bob", outage=1),
        touching("c3", T0 + 41 * DAY, ["a"], author="bob"),
    ]
    roster = {"amy": T0 + 10 * DAY, "bob": None, "zed": old + 1}
    table, _ = metrics(commits, {c.commit_id: 5.0 for c in commits}, roster=roster)
    r = by_path(table, "a")
    assert (r.nDiff2Y, r.nDiffs, r.nAuthor, r.nTotAuth) == (3, 4, 3, 2)
    assert (r.nOutages, r.outage_level) == (2, 1)
    assert r.knowLost == pytest.approx(100 / 3) and r.authLeft == pytest.approx(50)
    assert (r.fr, r.to) == (T0, T0 + 41 * DAY)
    assert not table.caveats


def test_missing_roster_caveat():
    table, _ = metrics([touching("c1", T0, ["a"])], {"c1": 5.0})
    assert table.caveats and "roster" in table.caveats[0]
    assert table.rows[0].knowLost == table.rows[0].authLeft == 0


def test_empty_window_errors():
    with pytest.raises(ValueError):
        compute_file_metrics([], build_rename_chains([]), {})
    commits = [touching("c1", T0, ["a"])]
    with pytest.raises(ValueError):
        metrics(commits, {"c1": 5.0}, as_of=T0 - 1)


def test_avgdc_and_scores():
    commits = [touching("c1", T0, ["a"], author="x"), touching("c2", T0 + 1, ["a"], author="y")]
    m = build_rename_chains(commits)
    a = m.resolve_current("a")
    katz = {file_node(a): 0.9, author_node("x"): 0.5, author_node("y"): 0.1}
    table = compute_file_metrics(commits, m, {"c1": 5, "c2": 5}, katz=katz, pagerank={file_node(a): 0.2})
    r = table.rows[0]
    assert r.avgdc == pytest.approx(((0.9 - 0.5) + (0.9 - 0.1)) / 2)
    assert r.katz == 0.9 and r.pagerank == 0.2


def test_renamed_file_is_one_row():
    commits = [touching("c1", T0, ["old.c"]), commit("c2", T0 + 5, ("r", "old.c", "new.c")), touching("c3", T0 + 9, ["new.c"])]
    table, _ = metrics(commits, {c.commit_id: 5.0 for c in commits})
    assert [r.current_path for r in table.rows] == ["new.c"]
    assert table.rows[0].nDiff2Y == 3


def test_geometric_columns_ignore_diff_order():
    rnd = random.Random(4)
    commits = [touching(f"c{i}", T0 + i, rnd.sample("abcdef", rnd.randint(1, 3))) for i in range(40)]
    dat = {c.commit_id: rnd.uniform(5, 125) for c in commits}
    m = build_rename_chains(commits)
    base = compute_file_metrics(commits, m, dat).rows
    shuffled = list(commits)
    rnd.shuffle(shuffled)
    again = compute_file_metrics(shuffled, m, dat).rows
    for x, y in zip(base, again):
        assert x.avgDAT == pytest.approx(y.avgDAT, rel=1e-12)
        assert x.avgNormDAT == pytest.approx(y.avgNormDAT, rel=1e-12)
        assert x.totNormDAT == pytest.approx(y.totNormDAT, rel=1e-12)


def test_invariants_on_synthetic_corpus():
    scn = generate(ScenarioSpec(seed=3, n_files=30, n_authors=6, days=300, intervention=None))
    corpus = Corpus.build(scn.commits, Settings())
    table = compute_file_metrics(corpus.commits, corpus.identity_map, corpus.dat, roster=scn.roster)
    lo, hi = table.window
    assert table.rows
    for r in table.rows:
        assert abs(r.diffsPerMonth * r.nMnth - r.nDiff2Y) <= 1
        assert 0 <= r.knowLost <= 100 and 0 <= r.authLeft <= 100
        assert lo <= r.fr <= r.to <= hi
        assert r.nTotAuth <= r.nAuthor and r.nDiff2Y <= r.nDiffs
        assert all(f >= 0.2 for _, f in r.topCochanged)


# -- ranking ------------------------------------------------------------------------


def row(ident, **kw):
    base = dict(
        identity_id=ident, current_path=f"{ident}.c", totDAT=1.0, avgDAT=1.0, totNormDAT=1.0, avgNormDAT=1.0,
        nDiff2Y=1, nOutages=0, outage_level=None, nAuthor=1, nDiffs=1, nMnth=1, diffsPerMonth=1.0,
        fr=T0, to=T0, min_cent=None, max_cent=None, avgdc=None, pagerank=None, katz=None,
        knowLost=0.0, authLeft=0.0, sloc=None, complexity=None, nFilePerDiff=1.0, nTotAuth=1,
    )
    base.update(kw)
    return FileMetricsRow(**base)


def test_rank_descending():
    rows = [row("F1", katz=0.2), row("F2", katz=0.9), row("F3", katz=0.5)]
    assert [r.identity_id for r in rank_files(rows, "katz")] == ["F2", "F3", "F1"]


def test_rank_ties_use_identity_and_missing_last():
    rows = [row("F3", katz=0.5), row("F1", katz=0.5), row("F2"), row("F0", katz=0.1)]
    assert [r.identity_id for r in rank_files(rows, "katz")] == ["F1", "F3", "F0", "F2"]


def test_rank_timestamps_ascend():
    rows = [row("F1", fr=T0 + 5), row("F2", fr=T0)]
    assert [r.identity_id for r in rank_files(rows, "fr")] == ["F2", "F1"]


def test_rank_filter():
    rows = [row("F1", nDiff2Y=3), row("F2", nDiff2Y=5), row("F3", nDiff2Y=9)]
    kept = rank_files(rows, "nDiff2Y", ["nDiff2Y>=5"])
    assert [r.identity_id for r in kept] == ["F3", "F2"]
    assert len(rank_files(rows, "katz", [("nDiff2Y", "<", 5)])) == 1


def test_rank_unknown_column_lists_valid_ones():
    with pytest.raises(UnknownColumnError) as err:
        rank_files([row("F1")], "centrality")
    assert "katz" in str(err.value)
    with pytest.raises(UnknownColumnError):
        rank_files([row("F1")], "katz", ["bogus > 1"])


# -- export -------------------------------------------------------------------------


def test_export_empty_is_header_only():
    buf = io.StringIO()
    export_table([], buf)
    assert buf.getvalue() == ",".join(COLUMNS) + "\n"


@pytest.mark.parametrize("fmt", ["csv", "json"])
def test_export_round_trip(fmt):
    rows = [
        row("F1", katz=0.123456789012345, sloc=40, outage_level=2, topCochanged=[("dir/b.c", 0.3), ("c:d.c", 0.25)]),
        row("F2", avgdc=-0.5, pagerank=1e-17),
    ]
    buf = io.StringIO()
    export_table(rows, buf, fmt)
    if fmt == "csv":
        assert len(buf.getvalue().splitlines()) == 3
        assert "dir/b.c:0.3;c:d.c:0.25" in buf.getvalue()
    buf.seek(0)
    assert read_table(buf, fmt) == rows


def test_export_bad_format():
    with pytest.raises(ValueError):
        export_table([], io.StringIO(), "xlsx")


def test_geometric_mean_helper():
    assert geometric_mean([2, 8]) == pytest.approx(4)
