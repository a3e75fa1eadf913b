import hashlib
from pathlib import Path

import pytest

from decaymap.classifier import Classifier, corpus_report
from decaymap.code_metrics import measure_tree
from decaymap.ingest import build_rename_chains, parse_commit_log, read_roster
from decaymap.pipeline import Corpus, ImpactInputs, Settings, run_impact
from decaymap.synthgen import PlantedIntervention, ScenarioSpec, flatten_renames, generate, write_scenario


def small(**kw):
    base = dict(seed=1, n_files=25, n_authors=5, days=240, intervention=PlantedIntervention(at_day=120, n_files=5))
    base.update(kw)
    return ScenarioSpec(**base)


def test_no_renames_gives_bijection():
    scn = generate(small(rename_probability=0.0))
    m = build_rename_chains(scn.commits)
    paths = {fc.path_after or fc.path_before for c in scn.commits for fc in c.file_changes}
    assert len(m.current_path) == len(paths)
    assert len(set(m.current_path.values())) == len(m.current_path)
    assert all(len(h) == 1 for h in m.history.values())
    assert scn.ground_truth["renamed_files"] == 0


def test_renames_keep_identity_count():
    scn = generate(small(rename_probability=0.5))
    assert scn.ground_truth["renamed_files"] > 0
    m = build_rename_chains(scn.commits)
    flat = build_rename_chains(flatten_renames(scn).commits)
    assert len(m.current_path) == len(flat.current_path)
    assert sorted(m.current_path.values()) == sorted(flat.current_path.values())


def test_planted_removal_recovered_exactly():
    scn = generate(small(planted_labels={"removal": 0.10}, intervention=None))
    n = len(scn.commits)
    planted = set(scn.ground_truth["planted_labels"]["removal"])
    assert len(planted) == round(0.10 * n)
    clf = Classifier()
    found = {c.commit_id for c in scn.commits if any(lab.category == "removal" for lab in clf.classify(c.message_title, c.message_tags))}
    assert found == planted
    assert corpus_report(scn.commits).percentages["removal"] == pytest.approx(100 * len(planted) / n)


def test_dat_multiplier_shows_in_report():
    spec = small(seed=2, intervention=PlantedIntervention(at_day=120, n_files=6, dat_multiplier=0.5))
    scn = generate(spec)
    settings = Settings()
    run = run_impact(Corpus.build(scn.commits, settings), scn.intervention, settings, ImpactInputs())
    ratio = run.report.metrics["dat_proxy_minutes"].effect
    assert 0.45 <= ratio <= 0.55


def test_same_seed_byte_identical(tmp_path):
    def digest(root):
        h = hashlib.sha256()
        for p in sorted(Path(root).rglob("*")):
            if p.is_file():
                h.update(p.relative_to(root).as_posix().encode())
                h.update(p.read_bytes())
        return h.hexdigest()

    write_scenario(generate(small(seed=9)), tmp_path / "a")
    write_scenario(generate(small(seed=9)), tmp_path / "b")
    write_scenario(generate(small(seed=10)), tmp_path / "c")
    assert digest(tmp_path / "a") == digest(tmp_path / "b")
    assert digest(tmp_path / "a") != digest(tmp_path / "c")


def test_written_files_use_ingest_formats(tmp_path):
    scn = generate(small(seed=4, planted_labels={"cleanup": 0.05}))
    paths = write_scenario(scn, tmp_path)
    with open(paths["commits"], encoding="utf-8") as fh:
        res = parse_commit_log(fh)
    assert res.malformed == 0 and len(res.records) == len(scn.commits)
    with open(paths["roster"], encoding="utf-8") as fh:
        assert read_roster(fh) == scn.roster
    tree = measure_tree(paths["source"])
    assert set(tree.files) == set(scn.tree("post"))
    assert not tree.unreadable


def test_ccn_multiplier_lowers_treated_complexity():
    scn = generate(small(seed=5, intervention=PlantedIntervention(at_day=120, n_files=5, ccn_multiplier=0.5)))
    treated = [k for k in scn.files_pre if scn.paths_post.get(k) in scn.ground_truth["treated_paths"]]
    assert treated
    before = sum(sum(scn.files_pre[k].functions) for k in treated)
    after = sum(sum(scn.files_post[k].functions) for k in treated)
    assert after < before
    untouched = [k for k in scn.files_post if k in scn.files_pre and k not in treated]
    assert all(scn.files_post[k] == scn.files_pre[k] for k in untouched)


@pytest.mark.parametrize(
    "bad",
    [
        dict(rename_probability=1.5),
        dict(planted_labels={"removal": 0.7, "cleanup": 0.6}),
        dict(intervention=PlantedIntervention(at_day=10_000)),
        dict(intervention=PlantedIntervention(dat_multiplier=0)),
    ],
)
def test_spec_validation(bad):
    with pytest.raises(ValueError):
        small(**bad)


def test_spec_json_round_trip():
    spec = small(seed=3)
    assert ScenarioSpec.from_json(spec.to_json()) == spec
    assert ScenarioSpec.from_json({**spec.to_json(), "intervention": None}).intervention is None
