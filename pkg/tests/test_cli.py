"""End-to-end command tests on a small synthetic cohort."""

import json
from pathlib import Path

import numpy as np
import pytest

from eegconn.cli import main
from eegconn.config import parse_config
from eegconn.errors import ConfigError
from eegconn.synthetic import make_synthetic_cohort

KINDS = "cnn2d_var,cnn2d_pdc,cnn1d_cn,fusion_feature,fusion_score,fusion_decision,svm_linear"

RESULT_IDS = [
    "cnn2d_var", "cnn2d_pdc", "cnn1d_cn", "fusion_feature", "fusion_score",
    "fusion_decision", "svm_var", "svm_pdc", "svm_cn", "svm_all",
]


def write_config(path: Path, manifest: Path, out_dir: Path, **overrides) -> Path:
    values = {
        "manifest": str(manifest),
        "output_dir": str(out_dir),
        "data_format": "csv_matrix",
        "channels": 4,
        "rate": 128.0,
        "var_order": 2,
        "band_grid_step": 1.0,
        "model_kinds": KINDS,
        "epochs": 6,
        "learning_rate": 0.01,
        "lr_decay": 0.0,
        "dropout": 0.25,
        "folds": 2,
        "val_fraction": 0.25,
        "seed": 11,
        "svm_steps": 400,
        "latency_repetitions": 2,
    }
    values.update(overrides)
    path.write_text("".join(f"{k} = {v}\n" for k, v in values.items()))
    return path


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    root = tmp_path_factory.mktemp("cliws")
    data = root / "data"
    manifest = make_synthetic_cohort(data, seed=21, n_group_a=7, n_group_b=6,
                                     channels=4, samples=420)
    out = root / "out"
    cfg = write_config(root / "run.cfg", manifest, out)
    assert main(["extract", "--config", str(cfg)]) == 0
    assert main(["train", "--config", str(cfg)]) == 0
    assert main(["eval", "--config", str(cfg)]) == 0
    assert main(["report", "--config", str(cfg)]) == 0
    return root, cfg, out, manifest


class TestConfigParsing:
    def test_unknown_key_rejected(self, tmp_path):
        p = tmp_path / "bad.cfg"
        p.write_text("manifest = x.csv\nmystery_knob = 3\n")
        with pytest.raises(ConfigError, match="mystery_knob"):
            parse_config(p)

    def test_bad_value_rejected(self, tmp_path):
        p = tmp_path / "bad.cfg"
        p.write_text("epochs = many\n")
        with pytest.raises(ConfigError, match="epochs"):
            parse_config(p)

    def test_bad_model_kind_rejected(self, tmp_path):
        p = tmp_path / "bad.cfg"
        p.write_text("model_kinds = cnn3d_maximal\n")
        with pytest.raises(ConfigError, match="cnn3d_maximal"):
            parse_config(p)

    def test_comments_and_defaults(self, tmp_path):
        p = tmp_path / "ok.cfg"
        p.write_text("# a comment\n\nmanifest = m.csv\n")
        cfg = parse_config(p)
        assert cfg.manifest == "m.csv"
        assert cfg.var_order == 5 and cfg.band_grid_step == 0.25


class TestExtract:
    def test_feature_files_per_subject(self, workspace):
        _, _, out, manifest = workspace
        files = sorted((out / "features").glob("*.feat"))
        assert len(files) == 13 * 3

    def test_rerun_byte_identical(self, workspace):
        root, cfg, out, _ = workspace
        target = out / "features" / "sz000_var.feat"
        before = target.read_bytes()
        assert main(["extract", "--config", str(cfg)]) == 0
        assert target.read_bytes() == before

    def test_missing_file_fails_subject_and_exit(self, tmp_path):
        data = tmp_path / "data"
        manifest = make_synthetic_cohort(data, seed=3, n_group_a=3, n_group_b=3,
                                         channels=4, samples=300)
        lines = manifest.read_text().splitlines()
        lines.append("missing.csv,ghost,SZ")
        manifest.write_text("\n".join(lines) + "\n")
        cfg = write_config(tmp_path / "r.cfg", manifest, tmp_path / "o")
        assert main(["extract", "--config", str(cfg)]) == 1
        assert len(list((tmp_path / "o" / "features").glob("*.feat"))) == 6 * 3

    def test_empty_manifest_fails(self, tmp_path):
        m = tmp_path / "m.csv"
        m.write_text("path,subject_id,label\n")
        cfg = write_config(tmp_path / "r.cfg", m, tmp_path / "o")
        assert main(["extract", "--config", str(cfg)]) == 2


class TestTrain:
    def test_artifacts_exist(self, workspace):
        _, _, out, _ = workspace
        assert (out / "folds.csv").exists()
        for rid in RESULT_IDS:
            for fold in range(2):
                assert (out / "models" / f"{rid}_fold{fold}.model").exists(), rid
        curves = list((out / "curves").glob("*.csv"))
        assert {c.name for c in curves} >= {
            "domain_var_fold0.csv", "domain_pdc_fold1.csv",
            "fusion_feature_fold0.csv", "fusion_score_stage2_fold1.csv",
        }

    def test_fold_plan_is_partition(self, workspace):
        _, _, out, manifest = workspace
        lines = (out / "folds.csv").read_text().splitlines()[1:]
        sids = [ln.split(",")[0] for ln in lines]
        folds = {int(ln.split(",")[1]) for ln in lines}
        assert len(sids) == 13 and folds == {0, 1}

    def test_curve_length_matches_epochs(self, workspace):
        _, _, out, _ = workspace
        lines = (out / "curves" / "domain_var_fold0.csv").read_text().splitlines()
        assert lines[0] == "epoch,train_loss,val_loss"
        assert len(lines) - 1 == 6


class TestEval:
    def test_metrics_json_layout(self, workspace):
        _, _, out, _ = workspace
        payload = json.loads((out / "metrics.json").read_text())
        assert payload["folds"] == 2
        assert payload["positive_class"] == "SZ"
        models = [row["model"] for row in payload["rows"]]
        assert models == RESULT_IDS
        for row in payload["rows"]:
            assert set(row["mean"]) == {"accuracy", "sensitivity", "specificity",
                                        "modified_accuracy"}
            assert len(row["per_fold"]) == 2
            assert row["mean"]["modified_accuracy"] == pytest.approx(
                (row["mean"]["sensitivity"] + row["mean"]["specificity"]) / 2.0
            )
            conf = row["confusion"]
            assert conf["tp"] + conf["fn"] + conf["tn"] + conf["fp"] == 13

    def test_deterministic_across_runs(self, workspace, tmp_path):
        root, _, out, manifest = workspace
        out2 = tmp_path / "out2"
        cfg2 = write_config(tmp_path / "r2.cfg", manifest, out2)
        assert main(["extract", "--config", str(cfg2)]) == 0
        assert main(["train", "--config", str(cfg2)]) == 0
        assert main(["eval", "--config", str(cfg2)]) == 0
        assert (out2 / "metrics.json").read_bytes() == (out / "metrics.json").read_bytes()
        model = "models/fusion_decision_fold0.model"
        assert (out2 / model).read_bytes() == (out / model).read_bytes()

    def test_band_filter_restricts_inputs(self, workspace, tmp_path):
        root, _, _, manifest = workspace
        out4 = tmp_path / "out4"
        cfg4 = write_config(tmp_path / "r4.cfg", manifest, out4,
                            model_kinds="cnn2d_pdc,cnn1d_cn", epochs=3,
                            band_filter="alpha")
        assert main(["extract", "--config", str(cfg4)]) == 0
        assert main(["train", "--config", str(cfg4)]) == 0
        assert main(["eval", "--config", str(cfg4)]) == 0
        payload = json.loads((out4 / "metrics.json").read_text())
        assert [row["model"] for row in payload["rows"]] == ["cnn2d_pdc", "cnn1d_cn"]

    def test_seed_override_changes_results(self, workspace, tmp_path):
        root, _, out, manifest = workspace
        out3 = tmp_path / "out3"
        cfg3 = write_config(tmp_path / "r3.cfg", manifest, out3,
                            model_kinds="cnn1d_cn", epochs=3)
        assert main(["extract", "--config", str(cfg3)]) == 0
        assert main(["train", "--config", str(cfg3), "--seed", "99"]) == 0
        assert main(["eval", "--config", str(cfg3), "--seed", "99"]) == 0
        payload = json.loads((out3 / "metrics.json").read_text())
        assert payload["seed"] == 99


class TestPredict:
    def test_single_domain_prediction(self, workspace, capsys):
        _, cfg, out, _ = workspace
        rc = main([
            "predict", "--config", str(cfg),
            "--model", str(out / "models" / "cnn2d_var_fold0.model"),
            "--input", str(out / "features" / "sz000_var.feat"),
        ])
        assert rc == 0
        result = json.loads(capsys.readouterr().out)
        assert result["subject_id"] == "sz000"
        assert result["label"] in ("SZ", "HC")
        assert sum(result["probabilities"].values()) == pytest.approx(1.0, abs=1e-9)

    def test_fusion_prediction_needs_three_inputs(self, workspace, capsys):
        _, cfg, out, _ = workspace
        args = [
            "predict", "--config", str(cfg),
            "--model", str(out / "models" / "fusion_decision_fold0.model"),
        ]
        for dom in ("var", "pdc", "cn"):
            args += ["--input", str(out / "features" / f"hc002_{dom}.feat")]
        assert main(args) == 0
        result = json.loads(capsys.readouterr().out)
        assert result["subject_id"] == "hc002"

    def test_mixed_subjects_rejected(self, workspace, capsys):
        _, cfg, out, _ = workspace
        rc = main([
            "predict", "--config", str(cfg),
            "--model", str(out / "models" / "fusion_decision_fold0.model"),
            "--input", str(out / "features" / "sz000_var.feat"),
            "--input", str(out / "features" / "hc002_pdc.feat"),
            "--input", str(out / "features" / "hc002_cn.feat"),
        ])
        assert rc == 2


class TestReport:
    def test_learning_curve_svgs(self, workspace):
        _, _, out, _ = workspace
        svgs = list((out / "report").glob("*.svg"))
        assert len(svgs) >= 6
        text = (out / "report" / "domain_var_fold0.svg").read_text()
        assert text.startswith("<svg") and "polyline" in text
        assert "n=6" in text  # curve length equals epochs run

    def test_feature_map_heatmaps(self, workspace):
        _, _, out, _ = workspace
        layer1 = sorted((out / "report" / "featmaps" / "layer1").glob("*.pgm"))
        layer2 = sorted((out / "report" / "featmaps" / "layer2").glob("*.pgm"))
        assert len(layer1) == 128  # first conv layer width
        assert len(layer2) == 64
        head = layer1[0].read_text().splitlines()
        assert head[0] == "P2"
        assert head[2] == "4 4"  # the 4-channel test cohort gives 4x4 maps

    def test_latency_table(self, workspace):
        _, _, out, _ = workspace
        table = (out / "report" / "latency.csv").read_text().splitlines()
        assert table[0] == "model,feature,mean_ms,repetitions"
        assert len(table) - 1 == len(RESULT_IDS)
        for line in table[1:]:
            assert float(line.split(",")[2]) > 0.0
