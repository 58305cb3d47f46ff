import json

import pytest

from chainbalance import cli
from chainbalance.errors import ValidationError
from chainbalance.hashing import ChainId
from chainbalance.scenario import parse_scenario

MINIMAL = """
name: mini
seed: 1
hash:
  seed: 7
  buckets: 256
chains:
  - [2, 3]
traffic:
  sessions: 40
  rate: 75.0
  bytes_per_session: 15000
  packet_size: 3000
horizon: 10.0
"""


def write(tmp_path, text, name="scn.yaml"):
    path = tmp_path / name
    path.write_text(text)
    return path


def test_parse_minimal_scenario(tmp_path):
    scenario = parse_scenario(write(tmp_path, MINIMAL))
    assert scenario.name == "mini"
    assert scenario.chains == (ChainId(2, 3),)
    assert scenario.bucket_count == 256
    assert scenario.traffic.sessions == 40


def test_parse_action_with_undeclared_pair(tmp_path):
    text = MINIMAL + "actions:\n  - {at: 2.0, op: remove, pair: [8, 9]}\n"
    with pytest.raises(ValidationError) as err:
        parse_scenario(write(tmp_path, text))
    assert "undeclared" in str(err.value)


def test_parse_duplicate_forward_tag(tmp_path):
    text = MINIMAL.replace("  - [2, 3]", "  - [2, 3]\n  - [2, 9]")
    with pytest.raises(ValidationError) as err:
        parse_scenario(write(tmp_path, text))
    assert "tag" in str(err.value)


def test_parse_rejects_small_bucket_count(tmp_path):
    text = MINIMAL.replace("buckets: 256", "buckets: 32")
    with pytest.raises(ValidationError):
        parse_scenario(write(tmp_path, text))


def test_parse_rejects_unsorted_actions(tmp_path):
    text = MINIMAL + (
        "actions:\n"
        "  - {at: 5.0, op: add, pair: [4, 5]}\n"
        "  - {at: 2.0, op: rebalance}\n"
    )
    with pytest.raises(ValidationError):
        parse_scenario(write(tmp_path, text))


def test_parse_missing_field_names_it(tmp_path):
    text = MINIMAL.replace("  rate: 75.0\n", "")
    with pytest.raises(ValidationError) as err:
        parse_scenario(write(tmp_path, text))
    assert "rate" in str(err.value)


def test_parse_capacity_mode_requires_capacity(tmp_path):
    text = MINIMAL + "nf:\n  mode: capacity\n"
    with pytest.raises(ValidationError):
        parse_scenario(write(tmp_path, text))


def test_run_writes_outputs_and_exits_zero(tmp_path):
    scn = write(tmp_path, MINIMAL)
    out = tmp_path / "out"
    code = cli.main(["run", str(scn), "--out", str(out)])
    assert code == 0
    assert (out / "series.csv").exists()
    assert (out / "events.jsonl").exists()
    report = json.loads((out / "report.json").read_text())
    assert report["clean"] is True
    assert report["bytes"]["leftover"] == 0
    assert abs(sum(report["shares"].values()) - 1.0) < 1e-3


def test_run_same_seed_byte_identical(tmp_path):
    scn = write(tmp_path, MINIMAL)
    out1, out2 = tmp_path / "a", tmp_path / "b"
    assert cli.main(["run", str(scn), "--out", str(out1)]) == 0
    assert cli.main(["run", str(scn), "--out", str(out2)]) == 0
    for name in ("series.csv", "events.jsonl", "report.json"):
        assert (out1 / name).read_bytes() == (out2 / name).read_bytes()


def test_run_seed_override_changes_output(tmp_path):
    scn = write(tmp_path, MINIMAL)
    out1, out2 = tmp_path / "a", tmp_path / "b"
    cli.main(["run", str(scn), "--out", str(out1)])
    cli.main(["run", str(scn), "--seed", "9", "--out", str(out2)])
    assert (out1 / "series.csv").read_bytes() != (out2 / "series.csv").read_bytes()


def test_run_invalid_file_exits_two(tmp_path):
    bad = write(tmp_path, MINIMAL.replace("buckets: 256", "buckets: 32"))
    assert cli.main(["run", str(bad)]) == 2


def test_run_missing_file_exits_two(tmp_path):
    assert cli.main(["run", str(tmp_path / "absent.yaml")]) == 2


def test_bundled_scenarios_all_parse():
    for name in cli.SCENARIO_ORDER:
        scenario = cli.bundled_scenario(name)
        assert scenario.name == name
        assert scenario.bucket_count == 1024


def test_csv_header_format(tmp_path):
    scn = write(tmp_path, MINIMAL)
    out = tmp_path / "out"
    cli.main(["run", str(scn), "--out", str(out)])
    lines = (out / "series.csv").read_text().splitlines()
    assert lines[0] == "time_s,chain_fwd_tag,bytes"
    fields = lines[1].split(",")
    assert len(fields) == 3 and fields[1] == "2"
