import dataclasses
import os

import numpy as np
import pytest

from slowfeat import cli, dataio, sfa
from slowfeat.config import RunConfig
from slowfeat.errors import InvalidInput, ParseError


def desk_config(tmp_path, **overrides):
    """A config small enough for test-speed end-to-end runs."""
    values = dict(
        classes=4, sequences_per_class=5, train_per_class=3,
        frames=30, height=32, width=40,
        cuboid_h=8, cuboid_w=8, cuboid_d=6, delta_t=3,
        pca_dim=20, k_per_class=8, fraction=0.2, max_cuboids=120,
        epochs=20, strategy="dsfa", seed=1,
        data_dir=str(tmp_path / "data"),
        model_path=str(tmp_path / "model.sfam"),
        features_dir=str(tmp_path / "features"),
        classifier_path=str(tmp_path / "clf.sfac"),
        report_path=str(tmp_path / "report.txt"),
        results_path=str(tmp_path / "results.txt"),
    )
    values.update(overrides)
    return RunConfig(**values)


def run_pipeline(config):
    cli.cmd_synth(config)
    cli.cmd_train(config)
    cli.cmd_featurize(config)
    cli.cmd_fit_classifier(config)
    return cli.cmd_evaluate(config)


# ---------------------------------------------------------------------------
# manifest and split


def test_manifest_round_trip(tmp_path):
    entries = [cli.Entry("a", 0, "a.sfv", "a.ann"),
               cli.Entry("b", 1, "b.sfv", "b.ann")]
    path = tmp_path / "manifest.txt"
    cli.save_manifest(path, entries)
    assert cli.load_manifest(path) == entries


def test_manifest_parse_errors(tmp_path):
    path = tmp_path / "manifest.txt"

    def expect(content, lineno):
        path.write_text(content)
        with pytest.raises(ParseError) as err:
            cli.load_manifest(path)
        assert err.value.line == lineno

    expect("a 0 a.sfv\n", 1)
    expect("a 0 a.sfv a.ann\na x b.sfv b.ann\n", 2)
    expect("a 0 a.sfv a.ann\na 1 b.sfv b.ann\n", 2)
    expect("", 1)


def test_split_is_seeded_and_disjoint(tmp_path):
    entries = [cli.Entry(f"c{c}s{i}", c, "v", "a")
               for c in range(2) for i in range(6)]
    cfg = desk_config(tmp_path, classes=2, sequences_per_class=6,
                      train_per_class=4)
    train1, test1 = cli.split_entries(entries, cfg)
    train2, test2 = cli.split_entries(entries, cfg)
    assert train1 == train2 and test1 == test2
    ids = {e.sequence_id for e in train1} | {e.sequence_id for e in test1}
    assert len(ids) == len(entries)
    for label in (0, 1):
        assert sum(e.label == label for e in train1) == 4
        assert sum(e.label == label for e in test1) == 2
    other = cli.split_entries(entries, dataclasses.replace(cfg, seed=9))[0]
    assert other != train1


def test_split_requires_room_for_test(tmp_path):
    entries = [cli.Entry(f"s{i}", 0, "v", "a") for i in range(3)] + \
        [cli.Entry(f"t{i}", 1, "v", "a") for i in range(5)]
    cfg = desk_config(tmp_path, classes=2, train_per_class=3)
    with pytest.raises(InvalidInput):
        cli.split_entries(entries, cfg)


# ---------------------------------------------------------------------------
# synth command


def test_cmd_synth_writes_loadable_dataset(tmp_path):
    cfg = desk_config(tmp_path, sequences_per_class=2, train_per_class=1)
    entries = cli.cmd_synth(cfg)
    assert len(entries) == 8
    manifest = cli.load_manifest(os.path.join(cfg.data_dir, "manifest.txt"))
    assert manifest == entries
    for e in manifest:
        frames = dataio.load_sequence(os.path.join(cfg.data_dir, e.video))
        assert frames.shape == (30, 32, 40)
        boxes = dataio.load_annotations(
            os.path.join(cfg.data_dir, e.annotation), len(frames))
        assert np.array_equal(boxes[0], [0, 0, 40, 32])
    assert dataio.load_config(
        os.path.join(cfg.data_dir, "dataset.cfg")) == cfg


def test_cmd_synth_is_deterministic(tmp_path):
    cfg1 = desk_config(tmp_path / "one", sequences_per_class=2,
                       train_per_class=1)
    cfg2 = desk_config(tmp_path / "two", sequences_per_class=2,
                       train_per_class=1)
    cli.cmd_synth(cfg1)
    cli.cmd_synth(cfg2)
    for e in cli.load_manifest(os.path.join(cfg1.data_dir, "manifest.txt")):
        a = open(os.path.join(cfg1.data_dir, e.video), "rb").read()
        b = open(os.path.join(cfg2.data_dir, e.video), "rb").read()
        assert a == b


def test_cmd_synth_rejects_too_many_classes(tmp_path):
    with pytest.raises(InvalidInput):
        cli.cmd_synth(desk_config(tmp_path, classes=5,
                                  sequences_per_class=2, train_per_class=1))


# ---------------------------------------------------------------------------
# full pipeline


def test_pipeline_end_to_end(tmp_path):
    cfg = desk_config(tmp_path)
    results = run_pipeline(cfg)
    assert results["sequences"] == 8
    assert 0.0 <= results["sequence_accuracy"] <= 1.0
    assert results["sequence_accuracy"] >= 0.75  # easy desk-scale classes
    assert os.path.exists(cfg.report_path)
    parsed = dataio.load_results(cfg.results_path)
    assert parsed["strategy"] == "dsfa"
    assert float(parsed["sequence_accuracy"]) == results["sequence_accuracy"]
    assert "average_selectivity" in parsed
    report = open(cfg.report_path).read()
    assert "confusion (rows predicted, cols true):" in report


def test_pipeline_rerun_is_bit_identical(tmp_path):
    cfg1 = desk_config(tmp_path / "one", sequences_per_class=4,
                       train_per_class=2)
    cfg2 = desk_config(tmp_path / "two", sequences_per_class=4,
                       train_per_class=2)
    run_pipeline(cfg1)
    run_pipeline(cfg2)

    def slurp(path):
        return open(path, "rb").read()

    assert slurp(cfg1.model_path) == slurp(cfg2.model_path)
    assert slurp(cfg1.classifier_path) == slurp(cfg2.classifier_path)
    assert slurp(cfg1.results_path) == slurp(cfg2.results_path)
    assert slurp(cfg1.report_path) == slurp(cfg2.report_path)
    for name in sorted(os.listdir(cfg1.features_dir)):
        assert slurp(os.path.join(cfg1.features_dir, name)) == \
            slurp(os.path.join(cfg2.features_dir, name))


def test_pipeline_usfa_has_no_selectivity(tmp_path):
    cfg = desk_config(tmp_path, strategy="usfa", sequences_per_class=3,
                      train_per_class=2, classes=2)
    results = run_pipeline(cfg)
    assert "average_selectivity" not in results


def test_pipeline_sdsfa_with_mirror(tmp_path):
    cfg = desk_config(tmp_path, strategy="sdsfa", grid_nx=2, grid_ny=1,
                      sequences_per_class=6, train_per_class=4,
                      k_per_class=4)
    results = run_pipeline(cfg)
    bank = dataio.load_bank(cfg.model_path)
    assert bank.strategy == "sdsfa"
    assert len(bank.models) == 2 * 4
    assert results["sequence_accuracy"] >= 0.5


def constraint_pool(model, cuboids):
    """The cuboids a model's zero-mean/unit-variance constraints cover."""
    if model.strategy in ("usfa", "dsfa"):
        return cuboids
    if model.strategy == "ssfa":
        return [c for c in cuboids if c.class_label == model.class_label]
    return [c for c in cuboids if c.region_label == model.region_label]


def assert_bank_constraints(bank, cuboids, delta_t):
    from slowfeat import cuboid as cuboid_mod
    for model in bank.models:
        pool = constraint_pool(model, cuboids)
        outs = np.vstack([sfa.apply(model, cuboid_mod.reformat(c, delta_t))
                          for c in pool])
        assert np.abs(outs.mean(axis=0)).max() < 1e-6
        cov = np.cov(outs.T, bias=True)
        assert np.abs(np.diag(cov) - 1.0).max() < 1e-4
        off = cov - np.diag(np.diag(cov))
        assert np.abs(off).max() < 1e-4


def test_constraint_suite_on_trained_bank(tmp_path):
    # slow-feature outputs over each model's constraint data: zero
    # mean, unit variance, decorrelated
    cfg = desk_config(tmp_path)
    cli.cmd_synth(cfg)
    entries = cli.load_manifest(os.path.join(cfg.data_dir, "manifest.txt"))
    train, _ = cli.split_entries(entries, cfg)
    cuboids = cli._training_cuboids(cfg, entries, train)
    bank = cli.fit_bank_from_cuboids(cfg, cuboids)
    assert_bank_constraints(bank, cuboids, cfg.delta_t)


# ---------------------------------------------------------------------------
# toy command


def test_cmd_toy_sfa(tmp_path):
    cfg = desk_config(tmp_path)
    results = cli.cmd_toy_sfa(cfg, length=600)
    assert results["corr_slowest_vs_latent"] > 0.95
    assert results["delta_slowest"] < 0.1 * results["min_channel_delta"]
    parsed = dataio.load_results(cfg.results_path)
    assert float(parsed["corr_slowest_vs_latent"]) == \
        results["corr_slowest_vs_latent"]


# ---------------------------------------------------------------------------
# argument handling and exit codes


def test_flags_override_config_file(tmp_path):
    cfg_path = tmp_path / "run.cfg"
    dataio.save_config(cfg_path, RunConfig(pca_dim=33, strategy="ssfa"))
    args = cli.build_parser().parse_args(
        ["train", "--config", str(cfg_path), "--pca-dim", "11"])
    cfg = cli.config_from_args(args)
    assert cfg.pca_dim == 11
    assert cfg.strategy == "ssfa"


def test_main_exit_codes(tmp_path, capsys):
    missing = str(tmp_path / "nope")
    assert cli.main(["train", "--data-dir", missing]) == 1
    err = capsys.readouterr().err
    assert err.startswith("error:")
    assert len(err.strip().splitlines()) == 1

    assert cli.main(["train", "--pca-dim", "banana"]) == 1
    assert cli.main(
        ["toy-sfa", "--length", "600",
         "--results-path", str(tmp_path / "toy.txt")]) == 0


def test_main_runs_synth(tmp_path):
    data_dir = str(tmp_path / "data")
    code = cli.main(["synth", "--classes", "2", "--sequences-per-class", "2",
                     "--frames", "16", "--height", "24", "--width", "24",
                     "--train-per-class", "1", "--data-dir", data_dir])
    assert code == 0
    assert os.path.exists(os.path.join(data_dir, "manifest.txt"))
