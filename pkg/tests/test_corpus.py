import json

import pytest
from hypothesis import given
from hypothesis import strategies as st

from asa.corpus import (
    MAX_QUESTIONS,
    CorpusSplit,
    QuestionSet,
    ResponseRecord,
    ScoreLabel,
    load_manifest,
    make_splits,
    write_manifest,
)
from asa.errors import (
    InsufficientDataError,
    ManifestError,
    ReferentialIntegrityError,
)


def _qset(id="set-a", k=2, **kw):
    return QuestionSet(
        id=id,
        questions=tuple(f"Question {i}?" for i in range(k)),
        exemplar_text="An exemplar. Another one.",
        image_ref=f"{id}.png",
        **kw,
    )


def _resp(id="r-0", set_id="set-a", **kw):
    kw.setdefault("transcript", "the man holds a ball")
    return ResponseRecord(id=id, question_set_id=set_id, **kw)


# -- record validation ---------------------------------------------------------


def test_score_label_accepts_1_to_5_and_none():
    s = ScoreLabel(holistic=5, relevance=1)
    assert s.get("holistic") == 5
    assert s.get("language_use") is None
    assert s.to_dict() == {"holistic": 5, "relevance": 1}


@pytest.mark.parametrize("bad", [0, 6, -1])
def test_score_label_rejects_out_of_range(bad):
    with pytest.raises(ManifestError):
        ScoreLabel(holistic=bad)


def test_score_label_get_rejects_unknown_kind():
    with pytest.raises(ValueError):
        ScoreLabel().get("fluency")


def test_question_set_limits():
    assert _qset(k=MAX_QUESTIONS).k == MAX_QUESTIONS
    with pytest.raises(ManifestError):
        _qset(k=MAX_QUESTIONS + 1)
    with pytest.raises(ManifestError):
        QuestionSet(id="x", questions=(), exemplar_text="e", image_ref="x.png")


def test_exemplar_segments_must_match_question_count():
    with pytest.raises(ManifestError):
        _qset(k=2, exemplar_segments=("only one",))


def test_response_requires_transcript():
    with pytest.raises(ManifestError):
        ResponseRecord(id="r", question_set_id="s", transcript="")


def test_response_rejects_overlapping_timestamps():
    with pytest.raises(ManifestError):
        _resp(word_timestamps=(("a", 0.0, 0.5), ("b", 0.4, 0.9)))
    with pytest.raises(ManifestError):
        _resp(word_timestamps=(("a", 0.5, 0.4),))


def test_corpus_split_rejects_overlap():
    with pytest.raises(ValueError):
        CorpusSplit(train=("a",), dev=("a",), known_test=(), unknown_test=())


# -- manifest round trip ---------------------------------------------------------


def test_manifest_round_trip(tmp_path):
    (tmp_path / "set-a.png").write_bytes(b"x")
    sets = [_qset(exemplar_segments=("Seg one.", "Seg two."))]
    resps = [
        _resp(
            scores=ScoreLabel(holistic=3),
            word_timestamps=(("the", 0.0, 0.2), ("man", 0.2, 0.5)),
        ),
        _resp(id="r-1"),
    ]
    path = tmp_path / "manifest.jsonl"
    write_manifest(path, sets, resps)
    got_sets, got_resps = load_manifest(path)
    assert got_sets == sets
    assert got_resps == resps


def test_load_manifest_reports_bad_json_line(tmp_path):
    path = tmp_path / "m.jsonl"
    path.write_text('{"kind": "question_set"\n', encoding="utf-8")
    with pytest.raises(ManifestError, match="line 1"):
        load_manifest(path)


def test_load_manifest_rejects_unknown_kind(tmp_path):
    path = tmp_path / "m.jsonl"
    path.write_text(json.dumps({"kind": "mystery"}) + "\n", encoding="utf-8")
    with pytest.raises(ManifestError, match="mystery"):
        load_manifest(path)


def test_load_manifest_rejects_dangling_set_reference(tmp_path):
    (tmp_path / "set-a.png").write_bytes(b"x")
    path = tmp_path / "m.jsonl"
    write_manifest(path, [_qset()], [_resp(set_id="nope")])
    with pytest.raises(ReferentialIntegrityError, match="nope"):
        load_manifest(path)


def test_load_manifest_rejects_duplicate_ids(tmp_path):
    (tmp_path / "set-a.png").write_bytes(b"x")
    path = tmp_path / "m.jsonl"
    write_manifest(path, [_qset()], [_resp(), _resp()])
    with pytest.raises(ManifestError, match="duplicate"):
        load_manifest(path)


def test_load_manifest_checks_referenced_files(tmp_path):
    path = tmp_path / "m.jsonl"
    write_manifest(path, [_qset()], [_resp()])
    with pytest.raises(ManifestError, match="image"):
        load_manifest(path)
    # and can be told not to
    sets, resps = load_manifest(path, check_files=False)
    assert len(sets) == 1 and len(resps) == 1


def test_load_manifest_checks_audio_files(tmp_path):
    (tmp_path / "set-a.png").write_bytes(b"x")
    path = tmp_path / "m.jsonl"
    write_manifest(path, [_qset()], [_resp(audio_ref="missing.wav")])
    with pytest.raises(ManifestError, match="audio"):
        load_manifest(path)


# -- splits ----------------------------------------------------------------------


def _records(n_per_set, set_ids):
    out = []
    for sid in set_ids:
        for j in range(n_per_set):
            out.append(_resp(id=f"{sid}-r{j}", set_id=sid))
    return out


def test_make_splits_sizes_follow_floor_floor_remainder():
    records = _records(10, ["s0", "s1", "s2", "s3"])
    splits = make_splits(records, unknown_set_id="s3", seed=0)
    # 30 outside the unknown set: floor(.8*30)=24, floor(.1*30)=3, rest 3
    assert len(splits.train) == 24
    assert len(splits.dev) == 3
    assert len(splits.known_test) == 3
    assert len(splits.unknown_test) == 10


def test_make_splits_isolates_unknown_set():
    records = _records(5, ["s0", "s1"])
    splits = make_splits(records, unknown_set_id="s1", seed=7)
    assert all(rid.startswith("s1-") for rid in splits.unknown_test)
    for part in (splits.train, splits.dev, splits.known_test):
        assert all(rid.startswith("s0-") for rid in part)


def test_make_splits_partition_is_exact():
    records = _records(10, ["s0", "s1", "s2"])
    splits = make_splits(records, unknown_set_id="s2", seed=1)
    everything = (
        list(splits.train)
        + list(splits.dev)
        + list(splits.known_test)
        + list(splits.unknown_test)
    )
    assert sorted(everything) == sorted(r.id for r in records)


@given(st.integers(min_value=0, max_value=2**32 - 1))
def test_make_splits_deterministic_under_seed(seed):
    records = _records(8, ["s0", "s1"])
    a = make_splits(records, unknown_set_id="s1", seed=seed)
    b = make_splits(records, unknown_set_id="s1", seed=seed)
    assert a == b


def test_make_splits_seed_changes_assignment():
    records = _records(20, ["s0", "s1"])
    a = make_splits(records, unknown_set_id="s1", seed=0)
    b = make_splits(records, unknown_set_id="s1", seed=1)
    assert a.train != b.train


def test_make_splits_rejects_bad_inputs():
    records = _records(4, ["s0", "s1"])
    with pytest.raises(InsufficientDataError):
        make_splits(records, unknown_set_id="missing")
    with pytest.raises(InsufficientDataError):
        make_splits(records, unknown_set_id="s1", ratios=(0.5, 0.2, 0.2))
    with pytest.raises(InsufficientDataError):
        # only 2 responses outside the unknown set
        make_splits(_records(2, ["s0", "s1"]), unknown_set_id="s1")


def test_as_dict_exposes_all_four_splits():
    records = _records(5, ["s0", "s1"])
    d = make_splits(records, unknown_set_id="s1").as_dict()
    assert set(d) == {"train", "dev", "known_test", "unknown_test"}
