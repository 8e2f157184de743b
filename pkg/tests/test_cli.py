"""End-to-end CLI surface: artifacts, determinism, exit codes."""
import filecmp

import numpy as np
import pytest

from dcganet import cli
from dcganet.errors import TrainingError
from dcganet.synth import read_pgm, write_pgm

MICRO_CFG = """\
model.schedule=4,8,16,32
scene.size=16
train.epochs=2
train.batch_size=2
train.base_lr=0.001
train.checkpoint_every=1
train.log_wall_time=false
"""


@pytest.fixture
def micro_cfg(tmp_path):
    p = tmp_path / "micro.cfg"
    p.write_text(MICRO_CFG)
    return p


def gen(tmp_path, name, count=4, seed=1, size=16):
    out = tmp_path / name
    rc = cli.main(["gen", "--out", str(out), "--count", str(count),
                   "--seed", str(seed), "--size", str(size)])
    assert rc == 0
    return out


@pytest.fixture
def trained(tmp_path, micro_cfg):
    data = gen(tmp_path, "data")
    run = tmp_path / "run"
    rc = cli.main(["train", "--data", str(data), "--val", str(data),
                   "--config", str(micro_cfg), "--out", str(run)])
    assert rc == 0
    return data, run


class TestGen:
    def test_writes_layout_and_manifest(self, tmp_path):
        out = gen(tmp_path, "d", count=3)
        assert len(list((out / "images").glob("*.pgm"))) == 3
        assert len(list((out / "masks").glob("*.pgm"))) == 3
        manifest = (out / "manifest.cfg").read_text()
        assert "scene.size=16" in manifest
        assert "# count=3" in manifest

    def test_byte_identical_across_runs(self, tmp_path):
        a = gen(tmp_path, "a", seed=5)
        b = gen(tmp_path, "b", seed=5)
        for sub in ("images", "masks"):
            for pa in sorted((a / sub).glob("*.pgm")):
                assert filecmp.cmp(pa, b / sub / pa.name, shallow=False)

    def test_seed_changes_content(self, tmp_path):
        a = gen(tmp_path, "s1", seed=1)
        b = gen(tmp_path, "s2", seed=2)
        assert sorted(p.name for p in (a / "images").iterdir()) != \
            sorted(p.name for p in (b / "images").iterdir())

    def test_negative_count_is_usage_error(self, tmp_path, capsys):
        rc = cli.main(["gen", "--out", str(tmp_path / "x"), "--count", "-1"])
        assert rc == 2
        assert "count" in capsys.readouterr().err


class TestTrain:
    def test_artifacts(self, trained):
        _, run = trained
        for name in ("run.cfg", "train.log", "best.ckpt", "epoch0000.ckpt",
                     "epoch0001.ckpt"):
            assert (run / name).exists(), name
        assert len((run / "train.log").read_text().splitlines()) == 2

    def test_resume_continues_epoch_numbers(self, trained, tmp_path, micro_cfg):
        data, run = trained
        cfg4 = tmp_path / "c4.cfg"
        cfg4.write_text(MICRO_CFG.replace("train.epochs=2", "train.epochs=4"))
        rc = cli.main(["train", "--data", str(data), "--config", str(cfg4),
                       "--out", str(run), "--resume", str(run / "epoch0001.ckpt")])
        assert rc == 0
        epochs = [int(l.split("\t")[0]) for l in
                  (run / "train.log").read_text().splitlines()]
        assert epochs == [0, 1, 2, 3]

    def test_bad_config_exit_2(self, tmp_path, capsys):
        bad = tmp_path / "bad.cfg"
        bad.write_text("train.velocity=9\n")
        data = gen(tmp_path, "d2", count=2)
        rc = cli.main(["train", "--data", str(data), "--config", str(bad),
                       "--out", str(tmp_path / "o")])
        assert rc == 2
        assert "velocity" in capsys.readouterr().err

    def test_missing_data_exit_2(self, tmp_path):
        rc = cli.main(["train", "--data", str(tmp_path / "nothing"),
                       "--out", str(tmp_path / "o")])
        assert rc == 2

    def test_numeric_failure_exit_3(self, tmp_path, micro_cfg, monkeypatch, capsys):
        data = gen(tmp_path, "d3", count=2)

        def explode(*a, **kw):
            raise TrainingError("NaN loss at epoch 0, batch ids ['x']")

        monkeypatch.setattr(cli, "fit", explode)
        rc = cli.main(["train", "--data", str(data), "--config", str(micro_cfg),
                       "--out", str(tmp_path / "o3")])
        assert rc == 3
        assert "numeric failure" in capsys.readouterr().err


class TestEval:
    def test_writes_metrics(self, trained, tmp_path, capsys):
        data, run = trained
        out = tmp_path / "ev"
        out.mkdir()
        rc = cli.main(["eval", "--data", str(data), "--ckpt", str(run / "best.ckpt"),
                       "--out", str(out), "--roc"])
        assert rc == 0
        assert "IoU" in capsys.readouterr().out
        assert (out / "metrics.csv").read_text().startswith("metric,value")
        roc = (out / "roc.csv").read_text().splitlines()
        assert roc[0] == "threshold,pd,fa"
        assert len(roc) == 21

    def test_bad_checkpoint_exit_2(self, trained, tmp_path):
        data, _ = trained
        junk = tmp_path / "junk.ckpt"
        junk.write_bytes(b"not a checkpoint")
        rc = cli.main(["eval", "--data", str(data), "--ckpt", str(junk)])
        assert rc == 2


class TestPredict:
    def test_outputs_mask_and_prob(self, trained, tmp_path):
        data, run = trained
        img = next((data / "images").glob("*.pgm"))
        out = tmp_path / "pred"
        rc = cli.main(["predict", "--image", str(img), "--ckpt",
                       str(run / "best.ckpt"), "--out", str(out)])
        assert rc == 0
        stem = img.stem
        mask = read_pgm(out / f"{stem}_mask.pgm")
        prob = read_pgm(out / f"{stem}_prob.pgm")
        assert mask.shape == prob.shape == (16, 16)
        assert set(np.unique(mask)) <= {0, 255}

    def test_attention_export(self, trained, tmp_path):
        data, run = trained
        img = next((data / "images").glob("*.pgm"))
        out = tmp_path / "attn"
        rc = cli.main(["predict", "--image", str(img), "--ckpt",
                       str(run / "best.ckpt"), "--out", str(out),
                       "--export-attention"])
        assert rc == 0
        names = {p.name for p in out.glob("*.pgm")}
        assert any("enc1.sim" in n for n in names)
        assert any("adff1.map" in n for n in names)

    def test_indivisible_needs_pad(self, trained, tmp_path, capsys):
        data, run = trained
        odd = tmp_path / "odd.pgm"
        write_pgm(odd, np.zeros((15, 15), dtype=np.uint8))
        out = tmp_path / "po"
        rc = cli.main(["predict", "--image", str(odd), "--ckpt",
                       str(run / "best.ckpt"), "--out", str(out)])
        assert rc == 2
        assert "--pad" in capsys.readouterr().err
        rc = cli.main(["predict", "--image", str(odd), "--ckpt",
                       str(run / "best.ckpt"), "--out", str(out), "--pad"])
        assert rc == 0
        assert read_pgm(out / "odd_prob.pgm").shape == (15, 15)

    def test_missing_checkpoint_exit_2(self, trained, tmp_path):
        data, _ = trained
        img = next((data / "images").glob("*.pgm"))
        rc = cli.main(["predict", "--image", str(img),
                       "--ckpt", str(tmp_path / "absent.ckpt"),
                       "--out", str(tmp_path / "p")])
        assert rc == 2


class TestAblate:
    def test_grid_runs_and_reports(self, tmp_path, micro_cfg, capsys):
        data = gen(tmp_path, "abl", count=4)
        grid = tmp_path / "grid.txt"
        grid.write_text("# two variants\nbaseline\nfull\n")
        cfg1 = tmp_path / "c1.cfg"
        cfg1.write_text(MICRO_CFG.replace("train.epochs=2", "train.epochs=1"))
        rc = cli.main(["ablate", "--data", str(data), "--grid", str(grid),
                       "--config", str(cfg1), "--out", str(tmp_path)])
        assert rc == 0
        out = capsys.readouterr().out
        assert "baseline" in out and "full" in out
        csv = (tmp_path / "ablation.csv").read_text().splitlines()
        assert csv[0] == "variant,iou,niou,pd,fa"
        assert csv[1].startswith("baseline,") and csv[2].startswith("full,")

    def test_duplicate_variant_rejected(self, tmp_path, capsys):
        data = gen(tmp_path, "abl2", count=2)
        grid = tmp_path / "g.txt"
        grid.write_text("baseline\nbaseline\n")
        rc = cli.main(["ablate", "--data", str(data), "--grid", str(grid)])
        assert rc == 2
        assert "duplicate" in capsys.readouterr().err

    def test_empty_grid_rejected(self, tmp_path):
        data = gen(tmp_path, "abl3", count=2)
        grid = tmp_path / "empty.txt"
        grid.write_text("# nothing here\n")
        assert cli.main(["ablate", "--data", str(data), "--grid", str(grid)]) == 2

    def test_unknown_variant_rejected(self, tmp_path, capsys):
        data = gen(tmp_path, "abl4", count=2)
        grid = tmp_path / "g2.txt"
        grid.write_text("resnet50\n")
        assert cli.main(["ablate", "--data", str(data), "--grid", str(grid)]) == 2
        assert "unknown variant" in capsys.readouterr().err


def test_console_entry_point_registered():
    import importlib.metadata as im
    eps = im.entry_points(group="console_scripts")
    assert any(ep.name == "dcganet" for ep in eps)
