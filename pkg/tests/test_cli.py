import json
import subprocess
import sys

import numpy as np
import pytest
from PIL import Image

from divebench import cli
from divebench import frame_io as fio
from divebench.study import StudyConfig, StudyItem, aggregate, load_store

from conftest import textured_frame


def run_cli(argv, capsys):
    code = cli.main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


def test_static_gen_then_score_zero(tmp_path, capsys):
    img = tmp_path / "cond.png"
    Image.fromarray(textured_frame(1, 96, 64).rgb).save(img)
    clip = tmp_path / "clip"
    code, _, _ = run_cli(["static-gen", "--image", str(img), "--n", "49",
                          "--out", str(clip)], capsys)
    assert code == 0
    assert len(list(clip.glob("frame_*.png"))) == 49

    code, out, _ = run_cli(["score", str(clip)], capsys)
    assert code == 0
    record = json.loads(out)
    assert record["score"] == 0.0
    assert record["dbq_contrib"] == 0.0


def test_bench_missing_manifest_exit_2(tmp_path, capsys):
    missing = tmp_path / "nowhere.json"
    code, _, err = run_cli(["bench", "--manifest", str(missing)], capsys)
    assert code == 2
    assert str(missing) in err


def test_usage_errors_exit_1(tmp_path, capsys):
    assert cli.main(["definitely-not-a-command"]) == 1
    code, out, _ = run_cli([], capsys)
    assert code == 1  # bare invocation prints help


def test_mca_demo_deterministic_stdout():
    cmd = [sys.executable, "-m", "divebench.cli", "mca-demo", "--seed", "7"]
    a = subprocess.run(cmd, capture_output=True, text=True)
    b = subprocess.run(cmd, capture_output=True, text=True)
    assert a.returncode == 0 and b.returncode == 0
    assert a.stdout == b.stdout
    assert a.stdout.count("[PASS]") == 4


def test_help_enumerates_flags(capsys):
    parser = cli.build_parser()
    top = parser.format_help()
    for fragment in ("--config", "--json", "--offline", "--seed", "--jobs",
                     "score", "bench", "annotate", "curate", "static-gen",
                     "mca-demo", "human-study", "serve-study", "report"):
        assert fragment in top

    sub_help = {
        "score": ("--subject-only", "--dump-flow", "video_dir"),
        "bench": ("--manifest", "--out"),
        "annotate": ("--manifest",),
        "curate": ("--manifest", "--out"),
        "static-gen": ("--image", "--n", "--out"),
        "serve-study": ("--config", "--port", "--host", "--store", "--ui"),
    }
    actions = {a.dest: a for a in parser._subparsers._group_actions}
    choices = next(iter(actions.values())).choices
    for name, flags in sub_help.items():
        text = choices[name].format_help()
        for flag in flags:
            assert flag in text, (name, flag)


def test_bench_offline_deterministic(tmp_path):
    clip = fio.write_sequence(fio.synthesize_warp(96, 96, 5, dx=2, seed=3),
                              tmp_path / "clip")
    static = fio.write_sequence(fio.synthesize_static(textured_frame(2, 96, 96), 5),
                                tmp_path / "static")
    items = []
    for i in range(3):
        items.append({"item_id": f"mov{i}", "prompt": "a dog running",
                      "video_dir": str(clip)})
        items.append({"item_id": f"sta{i}", "prompt": "a person sitting",
                      "video_dir": str(static)})
    manifest = tmp_path / "manifest.json"
    manifest.write_text(json.dumps({"model_name": "demo", "items": items}))

    def run_once(out_name):
        out = tmp_path / out_name
        cmd = [sys.executable, "-m", "divebench.cli", "bench",
               "--manifest", str(manifest), "--out", str(out),
               "--offline", "--seed", "7"]
        proc = subprocess.run(cmd, capture_output=True, text=True, cwd=tmp_path)
        assert proc.returncode == 0, proc.stderr
        return (out / "report_demo.json").read_bytes()

    assert run_once("out1") == run_once("out2")


def test_curate_cli(tmp_path, capsys):
    static = fio.write_sequence(fio.synthesize_static(textured_frame(1, 96, 96), 5),
                                tmp_path / "s")
    manifest = tmp_path / "corpus.json"
    manifest.write_text(json.dumps([{"item_id": "a", "video_dir": str(static)}]))
    code, out, _ = run_cli(["curate", "--manifest", str(manifest),
                            "--out", str(tmp_path / "cur"), "--json"], capsys)
    assert code == 0
    summary = json.loads(out)
    assert summary["kept"] == 1 and summary["dropped"] == 0
    assert (tmp_path / "cur" / "keep.json").is_file()


def test_human_study_aggregate_cli(tmp_path, capsys):
    cfg = StudyConfig(study_id="s1", models=["a", "b"],
                      items=[StudyItem(item_id="v0")],
                      dimensions=["overall"], n_volunteers_expected=2)
    cfg_path = tmp_path / "study.json"
    cfg_path.write_text(json.dumps({
        "study_id": "s1", "models": ["a", "b"],
        "items": [{"item_id": "v0"}], "dimensions": ["overall"],
        "n_volunteers_expected": 2}))
    store = tmp_path / "store.jsonl"
    store.write_text(
        '{"volunteer_id": "v", "item_id": "v0", "dimension": "overall", '
        '"ranking": ["a", "b"], "abstain": false, "timestamp": 0}\n')
    code, out, _ = run_cli(["human-study", "aggregate", "--store", str(store),
                            "--config", str(cfg_path)], capsys)
    assert code == 0
    body = json.loads(out)
    records, _ = load_store(store, cfg)
    assert body["dimensions"]["overall"]["overall"] == \
        aggregate(records, cfg)["dimensions"]["overall"]["overall"]


def test_report_merge_cli(tmp_path, capsys):
    def fake_report(name, dbq):
        return {"model_name": name, "n_items": 1, "dr": 1.0, "dc": 50.0,
                "dbq": dbq, "dbq_by_dim": {"ms": 0, "bc": 0, "sc": 0, "nat": 0},
                "per_item": [], "n_failed": 0, "errors": [],
                "subject_only": False}
    p1 = tmp_path / "r1.json"
    p2 = tmp_path / "r2.json"
    p1.write_text(json.dumps(fake_report("alpha", 10.0)))
    p2.write_text(json.dumps(fake_report("beta", 60.0)))
    out_md = tmp_path / "lb.md"
    code, out, _ = run_cli(["report", "merge", str(p1), str(p2),
                            "--out", str(out_md)], capsys)
    assert code == 0
    lines = out_md.read_text().splitlines()
    assert "beta" in lines[2] and "alpha" in lines[3]


def test_internal_error_exit_3(tmp_path, capsys):
    # every item fails to score -> internal invariant failure, exit 3
    manifest = tmp_path / "m.json"
    manifest.write_text(json.dumps({
        "model_name": "demo",
        "items": [{"item_id": "a", "prompt": "x",
                   "video_dir": str(tmp_path / "missing")}]}))
    code, _, err = run_cli(["bench", "--manifest", str(manifest),
                            "--out", str(tmp_path / "out"), "--offline"], capsys)
    assert code == 3
    assert "failed" in err


def test_config_file_rejects_unknown_keys(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"d_ref": 0.05, "mystery_knob": 1}))
    clip = fio.write_sequence(fio.synthesize_static(textured_frame(1), 3),
                              tmp_path / "clip")
    code, _, err = run_cli(["--config", str(cfg), "score", str(clip)], capsys)
    assert code == 2
    assert "mystery_knob" in err


def test_config_file_overrides_defaults(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"d_ref": 1.0}))  # huge d_ref suppresses score
    clip = fio.write_sequence(fio.synthesize_warp(64, 64, 3, dx=3, seed=1),
                              tmp_path / "clip")
    code, out, _ = run_cli(["--config", str(cfg), "score", str(clip)], capsys)
    assert code == 0
    assert json.loads(out)["score"] < 0.05
