import csv
import json
import subprocess


def run(cli, *args, expect=0):
    p = subprocess.run([cli, *args], capture_output=True, text=True)
    assert p.returncode == expect, p.stderr
    return p


def small(config, overrides, out):
    args = ["-c", config, "-o", str(out)]
    for o in overrides:
        args += ["--set", o]
    return args


def test_search_fuse_report(cli, benchmark_config, small_overrides, tmp_path):
    out = tmp_path / "run"
    p = run(cli, "search", *small(benchmark_config, small_overrides, out))
    assert "winner" in p.stdout
    report = json.loads((out / "search_report.json").read_text())
    assert report["schema"] == "dfprobe.search_report/1"
    with open(out / "heatmap.csv") as f:
        rows = list(csv.DictReader(f))
    assert {r["modality"] for r in rows} == {"image", "text"}
    assert (out / "config.json").exists()

    fuse_out = tmp_path / "fuse"
    run(cli, "fuse", *small(benchmark_config, small_overrides, fuse_out), "--report",
        str(out / "search_report.json"), "--strategies", "all")
    for name in ["fusion_eval.csv", "cluster.json", "loss_linear_addition.csv", "loss_simple_concat.csv"]:
        assert (fuse_out / name).exists(), name
    header = (fuse_out / "fusion_eval.csv").read_text().splitlines()[0]
    assert header == "config,mAP,CP,CR,CF1,OP,OR,OF1"

    rep_out = tmp_path / "report"
    run(cli, "report", "-o", str(rep_out), "--heatmap", str(out / "heatmap.csv"), "--modality", "image")
    table = (rep_out / "table_image.csv").read_text().splitlines()
    assert table[0].startswith("timestep,block,mAP")
    assert len(table) == 31


def test_ttest_from_files(cli, tmp_path):
    (tmp_path / "a.txt").write_text("1\n2\n3\n")
    (tmp_path / "b.txt").write_text("0\n0\n0\n")
    p = run(cli, "ttest", "-o", str(tmp_path / "t"), "--a", str(tmp_path / "a.txt"), "--b", str(tmp_path / "b.txt"))
    assert p.stdout.startswith("t=3.464")
    result = json.loads((tmp_path / "t" / "ttest.json").read_text())
    assert abs(result["t_value"] - 3.4641) < 1e-3


def test_exit_codes(cli, benchmark_config, tmp_path):
    p = run(cli, "search", "-c", str(tmp_path / "missing.json"), expect=3)
    assert p.stderr.startswith("error code=io")
    run(cli, "search", "-c", benchmark_config, "--set", "nosuch=1", "-o", str(tmp_path / "x"), expect=2)
    run(cli, "search", "--exhaustive", "-c", benchmark_config, "--set", "search.max_pairs=10",
        "-o", str(tmp_path / "y"), expect=4)
    run(cli, "frobnicate", expect=2)
