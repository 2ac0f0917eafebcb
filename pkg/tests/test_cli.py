"""End-to-end command tests driven through cli.main(argv).

The pipeline commands are exercised on a small generated scene; science
checks here are wrapper-thinness ones (the CLI's printed and persisted
numbers must equal direct library calls), not accuracy claims.
"""

import json

import numpy as np
import pytest

from hyperaug import cli, cnn, evaluation, hsio
from hyperaug.errors import ConfigError, FormatError


@pytest.fixture(scope="module")
def scene(tmp_path_factory):
    root = tmp_path_factory.mktemp("scene")
    rc = cli.main(
        [
            "ingest",
            "--synthetic",
            "classes=3",
            "bands=12",
            "per-class=40",
            "--seed",
            "3",
            "--out",
            str(root),
        ]
    )
    assert rc == 0
    return root / "synthetic.hsr", root / "synthetic.hsl"


def write_config(path, cube, labels, out, **overrides):
    keys = {
        "cube": cube,
        "labels": labels,
        "out": out,
        "scenario": "B",
        "variant": "without",
        "runs": 2,
        "seed": 11,
        "train_total": 30,
        "val_total": 9,
        "cnn_kernels": 4,
        "cnn_dense1": 16,
        "cnn_dense2": 8,
        "cnn_learning_rate": 1e-3,
        "cnn_batch_size": 8,
        "cnn_patience": 2,
        "cnn_max_epochs": 4,
        "tta_a": 2,
    }
    keys.update(overrides)
    lines = [f"{k} = {v}" for k, v in keys.items()]
    path.write_text("# test config\n" + "\n".join(lines) + "\n")
    return path


class TestConfigParsing:
    def test_round_trip_with_comments(self, tmp_path, scene):
        cube, labels = scene
        path = tmp_path / "exp.cfg"
        path.write_text(
            f"cube = {cube}\n"
            f"labels = {labels}\n"
            "out = results  # trailing comment\n"
            "\n"
            "# a full-line comment\n"
            "runs = 3\n"
            "augment_components = 1,2\n"
        )
        config = cli.parse_config(path)
        assert config.runs == 3
        assert config.augment_components == (1, 2)
        assert config.out == "results"

    def test_variants_list(self, tmp_path, scene):
        cube, labels = scene
        path = write_config(
            tmp_path / "e.cfg", cube, labels, "o", variants="without, pca-on"
        )
        assert cli.parse_config(path).variants == ("without", "pca-on")

    @pytest.mark.parametrize(
        "line,message",
        [
            ("bogus_key = 1", "unknown key"),
            ("runs = 2\nruns = 3", "twice"),
            ("runs = soon", "bad value"),
            ("runs", "expected 'key = value'"),
        ],
    )
    def test_malformed_lines(self, tmp_path, scene, line, message):
        cube, labels = scene
        path = tmp_path / "e.cfg"
        path.write_text(f"cube = {cube}\nlabels = {labels}\nout = o\n{line}\n")
        with pytest.raises(ConfigError, match=message):
            cli.parse_config(path)

    def test_required_keys(self, tmp_path):
        path = tmp_path / "e.cfg"
        path.write_text("runs = 1\n")
        with pytest.raises(ConfigError, match="required"):
            cli.parse_config(path)

    def test_missing_data_file(self, tmp_path, scene):
        _, labels = scene
        path = write_config(tmp_path / "e.cfg", "/no/such.hsr", labels, "o")
        with pytest.raises(FileNotFoundError):
            cli.parse_config(path)

    def test_bad_variant_and_scenario(self, tmp_path, scene):
        cube, labels = scene
        bad_variant = write_config(
            tmp_path / "a.cfg", cube, labels, "o", variant="offline"
        )
        with pytest.raises(ConfigError, match="variant"):
            cli.parse_config(bad_variant)
        bad_scenario = write_config(tmp_path / "b.cfg", cube, labels, "o", scenario="Q")
        with pytest.raises(ConfigError, match="scenario"):
            cli.parse_config(bad_scenario)

    def test_worker_count_env(self, monkeypatch):
        monkeypatch.setenv("HYPERAUG_THREADS", "3")
        assert cli.worker_count() == 3
        monkeypatch.setenv("HYPERAUG_THREADS", "many")
        with pytest.raises(ConfigError, match="HYPERAUG_THREADS"):
            cli.worker_count()


class TestIngest:
    def test_histogram_matches_direct_count(self, scene, capsys):
        cube, labels = scene
        rc = cli.main(
            ["ingest", "--cube", str(cube), "--labels", str(labels), "--summary"]
        )
        assert rc == 0
        out = capsys.readouterr().out
        loaded = hsio.load_labels(labels)
        for class_id, count in loaded.class_histogram().items():
            assert f"class {class_id}: {count}" in out
        assert "3 x 40 x 12" in out

    def test_synthetic_files_load(self, scene):
        cube, labels = scene
        assert hsio.load_cube(cube).bands == 12
        assert hsio.load_labels(labels).n_classes == 3

    def test_missing_file_exits_2(self, capsys):
        rc = cli.main(["ingest", "--cube", "/no/such/file.hsr", "--summary"])
        assert rc == 2
        assert "error" in capsys.readouterr().err

    def test_needs_a_source(self, capsys):
        assert cli.main(["ingest", "--summary"]) == 1


@pytest.fixture(scope="module")
def split_file(scene, tmp_path_factory):
    cube, labels = scene
    path = tmp_path_factory.mktemp("stage") / "split.txt"
    rc = cli.main(
        [
            "split",
            "--labels",
            str(labels),
            "--train-total",
            "30",
            "--val-total",
            "9",
            "--seed",
            "11",
            "--out",
            str(path),
        ]
    )
    assert rc == 0
    return path


@pytest.fixture(scope="module")
def finished_run(scene, tmp_path_factory):
    cube, labels = scene
    root = tmp_path_factory.mktemp("run")
    out = root / "results"
    config = write_config(root / "exp.cfg", cube, labels, out)
    rc = cli.main(["run", "--config", str(config)])
    assert rc == 0
    return config, out


class TestStageCommands:
    def test_split_counts(self, split_file):
        split = hsio.load_split(split_file)
        assert split.counts() == (30, 9, 81)
        assert set(split.per_class_counts("train").values()) == {10}

    def test_augment_originals_then_synthetics(self, scene, split_file, tmp_path):
        cube_path, _ = scene
        out = tmp_path / "samples.hss"
        rc = cli.main(
            [
                "augment",
                "--cube",
                str(cube_path),
                "--split",
                str(split_file),
                "--method",
                "pca",
                "--seed",
                "11",
                "--out",
                str(out),
            ]
        )
        assert rc == 0
        values, labels, flags = hsio.load_samples(out)
        cube = hsio.load_cube(cube_path)
        split = hsio.load_split(split_file)
        original_values, original_labels = hsio.extract_spectra(cube, split.train)
        assert np.array_equal(values[~flags], original_values)
        assert np.array_equal(labels[~flags], original_labels)
        # balanced split: every class doubles
        assert int(flags.sum()) == len(original_labels)

    def test_train_then_infer(self, scene, split_file, tmp_path, capsys):
        cube_path, labels_path = scene
        model_path = tmp_path / "model.cnn"
        rc = cli.main(
            [
                "train",
                "--cube",
                str(cube_path),
                "--labels",
                str(labels_path),
                "--split",
                str(split_file),
                "--kernels",
                "4",
                "--dense1",
                "16",
                "--dense2",
                "8",
                "--max-epochs",
                "4",
                "--patience",
                "2",
                "--seed",
                "2",
                "--out",
                str(model_path),
            ]
        )
        assert rc == 0

        results_path = tmp_path / "results.csv"
        rc = cli.main(
            [
                "infer",
                "--cube",
                str(cube_path),
                "--split",
                str(split_file),
                "--model",
                str(model_path),
                "--out",
                str(results_path),
            ]
        )
        assert rc == 0
        printed = capsys.readouterr().out

        # wrapper thinness: the CLI path must equal direct library calls
        cube = hsio.load_cube(cube_path)
        split = hsio.load_split(split_file)
        model = cnn.load_model(model_path)
        train_values, _ = hsio.extract_spectra(cube, split.train)
        test_values, test_labels = hsio.extract_spectra(cube, split.test)
        scaler = hsio.fit_band_scaler(train_values)
        expected = model.predict(scaler.transform(test_values))
        true_labels, predictions = cli._read_results_csv(results_path)
        assert np.array_equal(predictions, expected)
        assert np.array_equal(true_labels, test_labels)
        oa = evaluation.score(test_labels, expected, 3).oa
        assert f"OA {oa:.4f}" in printed

    def test_infer_tta_csv_has_vote_columns(self, scene, split_file, tmp_path):
        cube_path, labels_path = scene
        model_path = tmp_path / "model.cnn"
        cli.main(
            [
                "train",
                "--cube",
                str(cube_path),
                "--labels",
                str(labels_path),
                "--split",
                str(split_file),
                "--kernels",
                "4",
                "--dense1",
                "16",
                "--dense2",
                "8",
                "--max-epochs",
                "2",
                "--out",
                str(model_path),
            ]
        )
        out = tmp_path / "tta.csv"
        rc = cli.main(
            [
                "infer",
                "--cube",
                str(cube_path),
                "--split",
                str(split_file),
                "--model",
                str(model_path),
                "--tta",
                "pca",
                "--a",
                "2",
                "--out",
                str(out),
            ]
        )
        assert rc == 0
        header = out.read_text().splitlines()[0]
        assert header.startswith("row,col,true_label,pred_label,soft_vote_used")
        assert "votes_3" in header


class TestRun:
    def test_files_exist(self, finished_run):
        _, out = finished_run
        for name in (
            "run_0_results.csv",
            "run_1_results.csv",
            "report.csv",
            "report.json",
            "timings.csv",
        ):
            assert (out / name).is_file()

    def test_report_matches_run_csv(self, finished_run):
        _, out = finished_run
        doc = json.loads((out / "report.json").read_text())
        true_labels, predictions = cli._read_results_csv(out / "run_0_results.csv")
        direct = evaluation.score(true_labels, predictions, 3)
        assert doc["runs"][0]["oa"] == pytest.approx(direct.oa)
        assert doc["runs"][0]["aa"] == pytest.approx(direct.aa)
        oas = [run["oa"] for run in doc["runs"]]
        assert doc["aggregates"][0]["oa_mean"] == pytest.approx(np.mean(oas))

    def test_rerun_is_byte_identical(self, finished_run):
        config, out = finished_run
        stable = ["report.csv", "report.json", "run_0_results.csv", "run_1_results.csv"]
        before = {name: (out / name).read_bytes() for name in stable}
        assert cli.main(["run", "--config", str(config)]) == 0
        for name in stable:
            assert (out / name).read_bytes() == before[name], name

    def test_timings_not_in_report(self, finished_run):
        _, out = finished_run
        doc = json.loads((out / "report.json").read_text())
        assert "timings" not in doc["runs"][0]
        timing_lines = (out / "timings.csv").read_text().splitlines()
        assert timing_lines[0] == "variant,run," + ",".join(cli.TIMING_KEYS)
        assert len(timing_lines) == 3

    def test_online_variant_writes_vote_csv(self, scene, tmp_path):
        cube, labels = scene
        out = tmp_path / "results"
        config = write_config(
            tmp_path / "exp.cfg", cube, labels, out, variant="pca-on", runs=1
        )
        assert cli.main(["run", "--config", str(config)]) == 0
        header = (out / "run_0_results.csv").read_text().splitlines()[0]
        assert "votes_1" in header

    def test_threaded_run_matches_serial(self, scene, tmp_path, monkeypatch):
        cube, labels = scene
        outputs = {}
        for threads, name in (("1", "serial"), ("3", "threaded")):
            monkeypatch.setenv("HYPERAUG_THREADS", threads)
            out = tmp_path / name
            config = write_config(
                tmp_path / f"{name}.cfg", cube, labels, out, variant="pca-on", runs=1
            )
            assert cli.main(["run", "--config", str(config)]) == 0
            outputs[name] = (out / "report.json").read_bytes()
        assert outputs["serial"] == outputs["threaded"]

    def test_all_runs_failing_exits_nonzero(self, scene, tmp_path, capsys):
        cube, labels = scene
        config = write_config(
            tmp_path / "exp.cfg",
            cube,
            labels,
            tmp_path / "results",
            train_total=600,  # more than any class can supply
        )
        rc = cli.main(["run", "--config", str(config)])
        assert rc == 1
        err = capsys.readouterr().err
        assert "run 0 failed" in err and "run 1 failed" in err

    def test_missing_cube_exits_2(self, scene, tmp_path):
        _, labels = scene
        config = write_config(
            tmp_path / "exp.cfg", tmp_path / "gone.hsr", labels, tmp_path / "o"
        )
        assert cli.main(["run", "--config", str(config)]) == 2


class TestBench:
    def test_row_per_variant(self, scene, tmp_path, capsys):
        cube, labels = scene
        out = tmp_path / "bench"
        config = write_config(
            tmp_path / "bench.cfg",
            cube,
            labels,
            out,
            variants="without,noise,pca-on",
            runs=1,
        )
        assert cli.main(["bench", "--config", str(config)]) == 0
        lines = capsys.readouterr().out.splitlines()
        assert lines[0] == "variant," + ",".join(cli.TIMING_KEYS) + ",oa"
        assert [line.split(",")[0] for line in lines[1:]] == [
            "without",
            "noise",
            "pca-on",
        ]
        bench_lines = (out / "bench.csv").read_text().splitlines()
        assert len(bench_lines) == 4


class TestEvaluate:
    def test_scores_plain_csv(self, tmp_path, capsys):
        path = tmp_path / "results.csv"
        path.write_text(
            "row,col,true_label,pred_label\n"
            "0,0,1,1\n0,1,1,2\n1,0,2,2\n1,1,2,2\n"
        )
        assert cli.main(["evaluate", "--results", str(path)]) == 0
        out = capsys.readouterr().out
        assert "oa: 0.7500" in out
        assert "class 1: 0.5000" in out

    def test_compare_reports(self, tmp_path, capsys):
        a = {"runs": [{"oa": v} for v in (0.5, 0.6, 0.7, 0.8, 0.9)]}
        b = {"runs": [{"oa": v} for v in (0.4, 0.5, 0.6, 0.7, 0.8)]}
        path_a, path_b = tmp_path / "a.json", tmp_path / "b.json"
        path_a.write_text(json.dumps(a))
        path_b.write_text(json.dumps(b))
        assert cli.main(["evaluate", "--compare", str(path_a), str(path_b)]) == 0
        printed = capsys.readouterr().out
        direct = evaluation.wilcoxon_two_tailed(
            [r["oa"] for r in a["runs"]], [r["oa"] for r in b["runs"]]
        )
        assert f"p={direct.p:.6f}" in printed

    def test_mismatched_run_counts(self, tmp_path, capsys):
        path_a, path_b = tmp_path / "a.json", tmp_path / "b.json"
        path_a.write_text(json.dumps({"runs": [{"oa": 0.5}]}))
        path_b.write_text(json.dumps({"runs": [{"oa": 0.5}, {"oa": 0.6}]}))
        assert cli.main(["evaluate", "--compare", str(path_a), str(path_b)]) == 1

    def test_bad_header_exits_2(self, tmp_path):
        path = tmp_path / "results.csv"
        path.write_text("row;col;labels\n")
        assert cli.main(["evaluate", "--results", str(path)]) == 2

    def test_needs_input(self):
        assert cli.main(["evaluate"]) == 1


class TestSeedDerivation:
    def test_deterministic_and_stage_separated(self):
        a = cli.derive_seed(11, 0, "split")
        assert a == cli.derive_seed(11, 0, "split")
        assert a != cli.derive_seed(11, 1, "split")
        assert a != cli.derive_seed(11, 0, "cnn")
