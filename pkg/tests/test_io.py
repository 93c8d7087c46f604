import pytest

from amodalsize import io, synth
from amodalsize.boxes import BoundingBox, InstanceRecord
from amodalsize.errors import InputError


def test_record_round_trip(tmp_path):
    recs = synth.occlude(synth.render_dataset(synth.sample_dataset(0, 5)),
                         synth.OcclusionSpec(), 0)
    recs = [r.with_amodal(r.amodal, focal_px=500.0) for r in recs]
    path = tmp_path / "a.jsonl"
    io.write_records(path, recs, io.header_line("t", {"a": 1}, 3))
    back = io.read_records(path)
    assert back == recs
    assert all(b.extra == {"focal_px": 500.0} for b in back)
    assert path.read_text().startswith("# amodalsize t seed=3 config_sha256=")


def test_read_records_numbers_missing_instances(tmp_path):
    path = tmp_path / "a.jsonl"
    path.write_text('{"image_id": "x", "category": "c", "modal": [0, 0, 1, 1]}\n'
                    '{"image_id": "x", "category": "c", "modal": [0, 0, 2, 2]}\n'
                    '# comment\n'
                    '{"image_id": "y", "category": "c", "modal": [0, 0, 1, 1]}\n')
    assert [(r.image_id, r.instance) for r in io.read_records(path)] == [
        ("x", 0), ("x", 1), ("y", 0)]


@pytest.mark.parametrize("line", [
    "not json",
    "[1, 2]",
    '{"image_id": "x", "modal": [0, 0, 1, 1]}',
    '{"image_id": "x", "category": "c", "modal": [0, 0, 0, 1]}',
    '{"image_id": "x", "category": "c", "modal": [0, 0, 1]}',
])
def test_read_records_rejects_bad_lines(tmp_path, line):
    path = tmp_path / "a.jsonl"
    path.write_text(line + "\n")
    with pytest.raises(InputError):
        io.read_records(path)


def test_missing_file_is_input_error(tmp_path):
    with pytest.raises(InputError):
        io.read_records(tmp_path / "nope.jsonl")


def test_config_digest_order_independent():
    assert io.config_digest({"a": 1, "b": 2}) == io.config_digest({"b": 2, "a": 1})
    assert io.config_digest({"a": 1}) != io.config_digest({"a": 2})


def test_parse_config():
    cfg = io.parse_config("n = 3\nx = 0.5  # note\nflag = true\nname = car\nh = none\n")
    assert cfg == {"n": 3, "x": 0.5, "flag": True, "name": "car", "h": None}
    with pytest.raises(InputError):
        io.parse_config("no equals sign")


def test_sidecar_round_trip(tmp_path):
    scenes = synth.sample_dataset(1, 3)
    recs = synth.render_dataset(scenes)
    path = tmp_path / "truth.jsonl"
    io.write_sidecar(path, scenes, recs, io.header_line("truth", {}, 1))
    cams, inst = io.read_sidecar(path)
    assert set(cams) == {s.image_id for s in scenes}
    for r in recs:
        assert inst[(r.image_id, r.instance)]["amodal"] == r.amodal


def test_init_heights_round_trip(tmp_path):
    path = tmp_path / "init.txt"
    io.write_init_heights(path, {"dining table": 0.75, "car": 1.5}, "# h\n")
    assert io.read_init_heights(path) == {"dining table": 0.75, "car": 1.5}
    path.write_text("car -1\n")
    with pytest.raises(InputError):
        io.read_init_heights(path)


def test_tables(tmp_path):
    path = tmp_path / "t.tsv"
    io.write_table(path, "# h\n", ["a", "b"], [["x", 0.1], ["y", None]])
    assert io.read_table(path) == [{"a": "x", "b": "0.1"}, {"a": "y", "b": "NA"}]


def test_sensor_and_score_files(tmp_path):
    s = tmp_path / "sensors.txt"
    s.write_text("Canon EOS 5D 35.8\nSony DSC RX100 13.2\n")
    assert io.read_sensor_table(s) == {("canon", "eos 5d"): 35.8, ("sony", "dsc rx100"): 13.2}
    p = tmp_path / "scores.txt"
    p.write_text("a 0.1 0.9\nb 0.5 0.5\n")
    assert io.read_scores(p) == (["a", "b"], [[0.1, 0.9], [0.5, 0.5]])
    p.write_text("a 0.1 0.9\nb 0.5\n")
    with pytest.raises(InputError):
        io.read_scores(p)


def test_record_without_amodal_round_trips(tmp_path):
    r = InstanceRecord("i", "c", BoundingBox(1, 2, 3, 4), instance=0)
    path = tmp_path / "a.jsonl"
    io.write_records(path, [r], "# h\n")
    assert io.read_records(path) == [r]


def test_format_value_numpy_scalars():
    import numpy as np
    assert io.format_value(np.float64(0.25)) == "0.25"
    assert io.format_value(np.int64(7)) == "7"
    assert io.format_value(None) == "NA"
