import json
import os
import shutil

import pytest

from gebd.annotations import load_annotations
from gebd.evaluation import evaluate_corpus
from gebd.pipeline import (PipelineConfig, PipelineError, Pipeline,
                           parse_config_text, parse_mode, parse_thresholds,
                           read_boundary_csv, read_scores_csv, run_pipeline,
                           write_boundary_csv)
from gebd.synth import generate_corpus

CFG = dict(seed=11, workers=1, image_side=32, m=3)


@pytest.fixture(scope="module")
def corpus(tmp_path_factory):
    root = tmp_path_factory.mktemp("corpus")
    generate_corpus(root, n_videos=3, seed=11, duration=6.0, fps=10.0,
                    image_size=48)
    return root


@pytest.fixture(scope="module")
def finished_run(corpus, tmp_path_factory):
    out = tmp_path_factory.mktemp("run")
    manifest = run_pipeline(corpus, out, PipelineConfig(**CFG))
    return corpus, out, manifest


class TestConfig:
    def test_parse_key_value(self):
        text = "seed=5\nworkers = 2  # comment\nstride=0.5\nmode=window:0.3\n"
        values = parse_config_text(text)
        assert values == {"seed": 5, "workers": 2, "stride": 0.5,
                          "mode": "window:0.3"}

    def test_unknown_key_rejected(self):
        with pytest.raises(ValueError, match="unknown key"):
            parse_config_text("bogus=1\n")

    def test_thresholds_forms(self):
        assert parse_thresholds("0.05:0.05:0.2") == (0.05, 0.1, 0.15, 0.2)
        assert parse_thresholds("0.1,0.3") == (0.1, 0.3)

    def test_mode_forms(self):
        assert parse_mode("relative") == ("relative", None)
        assert parse_mode("window:0.25") == ("absolute_window", 0.25)
        with pytest.raises(ValueError):
            parse_mode("sideways")


class TestCsvFormats:
    def test_boundary_round_trip(self, tmp_path):
        path = tmp_path / "b.csv"
        data = {"v2": [1.5, 2.25], "v1": [0.125]}
        write_boundary_csv(path, data)
        assert read_boundary_csv(path) == data

    def test_boundary_unsorted_rejected(self, tmp_path):
        path = tmp_path / "b.csv"
        path.write_text("video_id,timestamp\nv,2.0\nv,1.0\n")
        with pytest.raises(ValueError, match="ascending"):
            read_boundary_csv(path)


class TestRun:
    def test_all_stages_complete(self, finished_run):
        _, out, manifest = finished_run
        names = [s["name"] for s in manifest["stages"]]
        assert names == ["validate", "consistency", "select-gt", "flow",
                         "sample", "train", "score", "detect", "eval", "report"]
        assert not any(s["skipped"] for s in manifest["stages"])
        for files in manifest["outputs"].values():
            for f in files:
                assert os.path.exists(f)

    def test_rerun_skips_everything(self, finished_run):
        corpus, out, _ = finished_run
        manifest = run_pipeline(corpus, out, PipelineConfig(**CFG))
        assert all(s["skipped"] for s in manifest["stages"])

    def test_eval_matches_library_recomputation(self, finished_run):
        corpus, out, _ = finished_run
        preds = read_boundary_csv(os.path.join(out, "predictions.csv"))
        gt = read_boundary_csv(os.path.join(out, "gt.csv"))
        sets = load_annotations(os.path.join(corpus, "annotations.json"))
        durations = {a.meta.video_id: a.meta.duration for a in sets}
        for aset in sets:
            gt.setdefault(aset.meta.video_id, [])
        report = evaluate_corpus(preds, gt, durations,
                                 thresholds=PipelineConfig().thresholds)
        with open(os.path.join(out, "eval_global.csv")) as fh:
            next(fh)
            for line, prf in zip(fh, report.global_prf):
                t, p, r, f1 = line.strip().split(",")
                assert float(p) == pytest.approx(prf.precision, abs=1e-6)
                assert float(r) == pytest.approx(prf.recall, abs=1e-6)
                assert float(f1) == pytest.approx(prf.f1, abs=1e-6)

    def test_scores_sorted_by_video_and_time(self, finished_run):
        _, out, _ = finished_run
        seqs = read_scores_csv(os.path.join(out, "scores.csv"))
        vids = [s.video_id for s in seqs]
        assert vids == sorted(vids)
        for seq in seqs:
            seq.validate()

    def test_consistency_csv_in_unit_interval(self, finished_run):
        _, out, _ = finished_run
        with open(os.path.join(out, "consistency.csv")) as fh:
            next(fh)
            rows = [line.strip().split(",") for line in fh]
        assert len(rows) == 15  # 3 videos x 5 annotators
        assert all(0.0 <= float(c) <= 1.0 for _, _, c in rows)

    def test_report_svgs_exist(self, finished_run):
        _, out, _ = finished_run
        names = sorted(os.listdir(os.path.join(out, "report")))
        assert "class_top.svg" in names and "class_bottom.svg" in names
        assert sum(1 for n in names if n.startswith("timeline_")) == 3


class TestResumption:
    def test_deleting_scores_reruns_only_downstream(self, corpus, tmp_path):
        out = tmp_path / "run"
        run_pipeline(corpus, out, PipelineConfig(**CFG))
        os.remove(out / "scores.csv")
        manifest = run_pipeline(corpus, out, PipelineConfig(**CFG))
        state = {s["name"]: s["skipped"] for s in manifest["stages"]}
        assert state["flow"] and state["sample"] and state["train"]
        assert not state["score"] and not state["detect"] and not state["eval"]

    def test_stage_failure_recorded(self, corpus, tmp_path, monkeypatch):
        out = tmp_path / "run"
        config = PipelineConfig(**CFG)
        pipe = Pipeline(corpus, out, config)
        monkeypatch.setattr(pipe, "stage_flow",
                            lambda: (_ for _ in ()).throw(RuntimeError("boom")))
        with pytest.raises(PipelineError, match="flow"):
            pipe.run()
        manifest = json.load(open(out / "manifest.json"))
        names = [s["name"] for s in manifest["stages"]]
        assert names[-1] == "flow"
        assert manifest["stages"][-1]["failed"] == "boom"
        # completed stages resume cleanly after the failure
        manifest = run_pipeline(corpus, out, config)
        state = {s["name"]: s["skipped"] for s in manifest["stages"]}
        assert state["validate"] and state["consistency"]
        assert not state["flow"]


class TestWorkerInvariance:
    def test_two_workers_match_single_worker_bytes(self, corpus, tmp_path):
        outs = []
        for workers in (1, 2):
            out = tmp_path / f"run{workers}"
            cfg = dict(CFG)
            cfg["workers"] = workers
            run_pipeline(corpus, out, PipelineConfig(**cfg))
            outs.append(out)
        for name in ("scores.csv", "predictions.csv", "eval_global.csv",
                     "gt.csv", "windows/manifest.csv"):
            a = (outs[0] / name).read_bytes()
            b = (outs[1] / name).read_bytes()
            assert a == b, f"{name} differs between worker counts"
        # window tensors byte-identical too
        vid_dir = sorted(os.listdir(outs[0] / "windows"))[0]
        if vid_dir != "manifest.csv":
            sample = sorted(os.listdir(outs[0] / "windows" / vid_dir))[:4]
            for name in sample:
                assert (outs[0] / "windows" / vid_dir / name).read_bytes() == \
                    (outs[1] / "windows" / vid_dir / name).read_bytes()


class TestGtPolicies:
    def test_weighted_policy_runs(self, corpus, tmp_path):
        cfg = dict(CFG)
        cfg["gt_policy"] = "weighted:3"
        out = tmp_path / "run"
        manifest = run_pipeline(corpus, out, PipelineConfig(**cfg))
        assert os.path.exists(out / "gt.csv")
        gt = read_boundary_csv(out / "gt.csv")
        assert len(gt) == 3


class TestConsistencySource:
    def test_file_values_used_only_on_request(self, corpus, tmp_path):
        # plant recognizable consistency values in a copy of the corpus
        corpus2 = tmp_path / "corpus2"
        shutil.copytree(corpus, corpus2)
        doc = json.load(open(corpus2 / "annotations.json"))
        for entry in doc:
            for k, ann in enumerate(entry["annotators"]):
                ann["f1_consistency"] = 0.1 * (k + 1)
        (corpus2 / "annotations.json").write_text(json.dumps(doc))

        def consistency_values(out, use_file):
            cfg = PipelineConfig(**CFG, use_file_consistency=use_file)
            pipe = Pipeline(corpus2, out, cfg)
            os.makedirs(out, exist_ok=True)
            pipe.stage_consistency()
            with open(out / "consistency.csv") as fh:
                next(fh)
                return [float(line.strip().split(",")[2]) for line in fh]

        trusted = consistency_values(tmp_path / "a", use_file=True)
        assert trusted == pytest.approx([0.1, 0.2, 0.3, 0.4, 0.5] * 3)
        recomputed = consistency_values(tmp_path / "b", use_file=False)
        assert recomputed != pytest.approx(trusted)
