import json

import numpy as np
import pytest

from vehiclesound.cli import (ConfigError, default_config, format_config,
                              main, parse_config_text)

from conftest import write_pcm16


@pytest.fixture(scope="module")
def corpus(tmp_path_factory):
    out = tmp_path_factory.mktemp("corpus")
    rc = main(["synth", "--out-dir", str(out), "--synth-per-class", "6",
               "--synth-duration-s", "0.6", "--seed", "3"])
    assert rc == 0
    return out


def run_cli(capsys, *args):
    rc = main(list(args))
    captured = capsys.readouterr()
    return rc, captured.out, captured.err


def test_extract_csv_shape_and_determinism(corpus, tmp_path, capsys):
    out1 = tmp_path / "f1.csv"
    out2 = tmp_path / "f2.csv"
    manifest = str(corpus / "manifest.csv")
    assert main(["extract", "--manifest", manifest, "--out", str(out1)]) == 0
    assert main(["extract", "--manifest", manifest, "--out", str(out2)]) == 0
    assert out1.read_bytes() == out2.read_bytes()
    lines = out1.read_text().splitlines()
    assert lines[0].startswith("signal,frame_index,")
    # grouped by signal in manifest order
    names = [row.split(",")[0] for row in lines[1:]]
    assert names[0] == "bus_000.wav"
    firsts = [n for i, n in enumerate(names) if i == 0 or names[i - 1] != n]
    assert firsts == sorted(set(names), key=firsts.index)
    assert len(firsts) == 24


def test_extract_silence_rows_unselected(tmp_path, capsys):
    write_pcm16(tmp_path / "quiet.wav", np.zeros(7000))
    (tmp_path / "m.csv").write_text("path,label\nquiet.wav,bus\n")
    out = tmp_path / "features.csv"
    assert main(["extract", "--manifest", str(tmp_path / "m.csv"),
                 "--out", str(out)]) == 0
    rows = [ln.split(",") for ln in out.read_text().splitlines()[1:]]
    assert rows and all(r[6] == "0" and r[7] == "0" for r in rows)


def test_extract_figures(corpus, tmp_path):
    figs = tmp_path / "figs"
    assert main(["extract", "--manifest", str(corpus / "manifest.csv"),
                 "--out", str(tmp_path / "f.csv"), "--figures", str(figs)]) == 0
    for name in ("features_energy.png", "features_zcr.png", "features_pitch.png"):
        assert (figs / name).stat().st_size > 0


def test_train_metadata_and_determinism(corpus, tmp_path, capsys):
    manifest = str(corpus / "manifest.csv")
    m1 = tmp_path / "m1.json"
    m2 = tmp_path / "m2.json"
    m3 = tmp_path / "m3.json"
    assert main(["train", "--manifest", manifest, "--model-out", str(m1)]) == 0
    assert main(["train", "--manifest", manifest, "--model-out", str(m2)]) == 0
    assert m1.read_bytes() == m2.read_bytes()
    doc = json.loads(m1.read_text())
    assert doc["kind"] == "qda"
    assert len(doc["params"]["means"]) == 4
    assert doc["config_fingerprint"].startswith("sha256:")
    assert main(["train", "--manifest", manifest, "--model-out", str(m3),
                 "--high-energy-only"]) == 0
    doc_he = json.loads(m3.read_text())
    assert doc_he["training"]["frames_used"] < doc["training"]["frames_used"]
    assert doc_he["training"]["frames_periodic"] == doc["training"]["frames_periodic"]


def test_classify_training_files(corpus, tmp_path, capsys):
    model = tmp_path / "model.json"
    assert main(["train", "--manifest", str(corpus / "manifest.csv"),
                 "--model-out", str(model)]) == 0
    capsys.readouterr()  # drop the train command's status line
    rc, out, _ = run_cli(capsys, "classify", "--model", str(model),
                         str(corpus / "car_000.wav"), str(corpus / "truck_001.wav"))
    assert rc == 0
    lines = out.strip().splitlines()
    assert len(lines) == 2
    assert lines[0].split("\t")[1] == "car"
    assert lines[1].split("\t")[1] == "truck"
    assert "car_000.wav" in lines[0]


def test_classify_silence_unclassifiable(corpus, tmp_path, capsys):
    model = tmp_path / "model.json"
    main(["train", "--manifest", str(corpus / "manifest.csv"),
          "--model-out", str(model)])
    silent = tmp_path / "silence.wav"
    write_pcm16(silent, np.zeros(7000))
    rc, out, _ = run_cli(capsys, "classify", "--model", str(model), str(silent))
    assert rc == 2
    assert "unclassifiable" in out


def test_classify_refuses_config_drift(corpus, tmp_path, capsys):
    model = tmp_path / "model.json"
    main(["train", "--manifest", str(corpus / "manifest.csv"),
          "--model-out", str(model)])
    rc, _, err = run_cli(capsys, "classify", "--model", str(model),
                         "--window-len", "200", str(corpus / "car_000.wav"))
    assert rc == 1
    assert "window_len" in err and "conflicts" in err


def test_evaluate_text_and_determinism(corpus, capsys):
    args = ["evaluate", "--manifest", str(corpus / "manifest.csv"),
            "--cv-folds", "3"]
    rc1, out1, _ = run_cli(capsys, *args)
    rc2, out2, _ = run_cli(capsys, *args)
    assert rc1 == rc2 == 0
    assert out1 == out2
    assert "accuracy:" in out1 and "confusion" in out1


def test_evaluate_compare_rows_in_order(corpus, capsys):
    rc, out, _ = run_cli(capsys, "evaluate", "--manifest",
                         str(corpus / "manifest.csv"), "--cv-folds", "3",
                         "--knn-k", "5", "--compare")
    assert rc == 0
    lines = out.strip().splitlines()
    assert len(lines) == 8
    order = ["least squares", "kNN k=5 cosine", "kNN k=5 euclidean", "LDA",
             "LDA high-energy", "QDA", "QDA high-energy"]
    for line, name in zip(lines[1:], order):
        assert line.startswith(name)


def test_evaluate_figures_and_out(corpus, tmp_path):
    figs = tmp_path / "figs"
    out = tmp_path / "report.json"
    rc = main(["--format", "json", "evaluate", "--manifest",
               str(corpus / "manifest.csv"), "--cv-folds", "3",
               "--out", str(out), "--figures", str(figs)])
    assert rc == 0
    doc = json.loads(out.read_text())
    assert doc["classifier"] == "QDA"
    assert len(doc["fold_accuracies"]) == 3
    assert (figs / "confusion.png").stat().st_size > 0
    assert (figs / "fold_accuracies.png").stat().st_size > 0


def test_evaluate_k_larger_than_class(corpus, capsys):
    rc, _, err = run_cli(capsys, "evaluate", "--manifest",
                         str(corpus / "manifest.csv"), "--cv-folds", "7")
    assert rc == 2
    assert "bus" in err


def test_config_file_and_flag_precedence(corpus, tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("alpha = 1.5        # tighten the energy gate\ncv_folds = 3\n")
    manifest = str(corpus / "manifest.csv")
    rc, out_file, _ = run_cli(capsys, "--format", "json", "--config", str(cfg),
                              "evaluate", "--manifest", manifest)
    assert rc == 0
    assert json.loads(out_file)["config"]["alpha"] == 1.5
    rc, out_flag, _ = run_cli(capsys, "--format", "json", "--config", str(cfg),
                              "evaluate", "--manifest", manifest, "--alpha", "2.0")
    assert rc == 0
    assert json.loads(out_flag)["config"]["alpha"] == 2.0


def test_config_rejects_unknown_key(tmp_path, capsys):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("window_size = 100\n")
    rc, _, err = run_cli(capsys, "--config", str(cfg), "synth", "--out-dir",
                         str(tmp_path / "x"))
    assert rc == 1
    assert "window_size" in err


def test_config_round_trip():
    cfg = default_config()
    cfg["alpha"] = 1.25
    cfg["high_energy_only"] = True
    cfg["synth_snr_db"] = float("inf")
    assert {**default_config(), **parse_config_text(format_config(cfg))} == cfg


def test_config_value_errors():
    with pytest.raises(ConfigError):
        parse_config_text("cv_folds = many\n")
    with pytest.raises(ConfigError):
        parse_config_text("high_energy_only = maybe\n")
    with pytest.raises(ConfigError):
        parse_config_text("just a line\n")


def test_help_lists_config_keys(capsys):
    rc = main(["evaluate", "--help"])
    out = capsys.readouterr().out
    assert rc == 0
    for flag, default in (("--window-len", "165"), ("--overlap", "55"),
                          ("--clip-fraction", "0.68"), ("--cv-folds", "10"),
                          ("--max-pitch-hz", "1000"), ("--median-width", "3")):
        assert flag in out and default in out


def test_usage_error_exit_code(capsys):
    assert main(["evaluate"]) == 1  # missing --manifest
    assert main(["no-such-command"]) == 1
