import numpy as np
import pytest
from PIL import Image

from depseg import backends, tensor_io
from depseg import cli as pipeline_cli
from exporter import cli, jobs, models


def stub_depth_loader(name=None):
    def run(rgb):
        return np.full(rgb.shape[:2], 0.5, dtype=np.float32)

    return run


def stub_encoder_loader(name=None):
    def run(rgb):
        rng = np.random.default_rng(int(rgb.sum()) % (2**31))
        return rng.standard_normal(
            (rgb.shape[0] // 8, rgb.shape[1] // 8, 8)
        ).astype(np.float32)

    return run


def stub_segmenter_loader(name=None):
    def run(rgb, points):
        return np.full(rgb.shape[:2], -1.0, dtype=np.float32)

    return run


@pytest.fixture
def stubbed(monkeypatch):
    monkeypatch.setattr(models, "load_depth_model", stub_depth_loader)
    monkeypatch.setattr(models, "load_encoder_model", stub_encoder_loader)
    monkeypatch.setattr(models, "load_segmenter_model", stub_segmenter_loader)


@pytest.fixture
def dataset(tmp_path):
    rng = np.random.default_rng(7)
    frames_file = tmp_path / "frames.tsv"
    lines = []
    for i in range(2):
        img = rng.integers(0, 255, (48, 64, 3)).astype(np.uint8)
        Image.fromarray(img).save(tmp_path / f"f{i}.png")
        lines.append(f"f{i}\tf{i}.png")
    frames_file.write_text("\n".join(lines) + "\n")
    return frames_file, tmp_path


def test_export_depth_and_tokens(stubbed, dataset, tmp_path):
    frames_file, _ = dataset
    out = tmp_path / "export"
    assert cli.main(["export-depth", "--frames", str(frames_file),
                     "--out", str(out)]) == 0
    assert cli.main(["export-tokens", "--frames", str(frames_file),
                     "--out", str(out)]) == 0

    entries = backends.parse_manifest(out / "manifest.tsv")
    assert set(entries) == {"f0", "f1"}
    be = backends.OracleBackend(out / "manifest.tsv")
    depth = be.depth_of("f0")
    assert depth.shape == (48, 64) and np.all(depth == 0.5)
    tokens = be.token_grid_of("f1")
    assert tokens.shape == (6, 8, 8)
    assert "# dim=8" in (out / "manifest.tsv").read_text()


def test_export_deterministic_reruns(stubbed, dataset, tmp_path):
    frames_file, _ = dataset
    a, b = tmp_path / "a", tmp_path / "b"
    for out in (a, b):
        cli.main(["export-depth", "--frames", str(frames_file), "--out", str(out)])
        cli.main(["export-tokens", "--frames", str(frames_file), "--out", str(out)])
    for sub in ("depth", "tokens"):
        for f in sorted((a / sub).iterdir()):
            assert f.read_bytes() == (b / sub / f.name).read_bytes()


def test_missing_frame_recorded_job_continues(stubbed, dataset, tmp_path):
    frames_file, base = dataset
    with open(frames_file, "a") as fh:
        fh.write("ghost\tno_such_file.png\n")
    out = tmp_path / "export"
    rc = cli.main(["export-depth", "--frames", str(frames_file), "--out", str(out)])
    assert rc == 1
    assert (out / "depth" / "f0.tns").exists()
    assert (out / "depth" / "f1.tns").exists()
    errors = (out / "errors.txt").read_text()
    assert errors.startswith("ghost\t")
    # manifest only lists the frames that exported
    assert set(backends.parse_manifest(out / "manifest.tsv")) == {"f0", "f1"}


def test_two_pass_score_export_with_pipeline(stubbed, dataset, tmp_path):
    frames_file, _ = dataset
    out = tmp_path / "export"
    cli.main(["export-depth", "--frames", str(frames_file), "--out", str(out)])
    cli.main(["export-tokens", "--frames", str(frames_file), "--out", str(out)])
    manifest = out / "manifest.tsv"

    gt_dir = tmp_path / "gt"
    gt_dir.mkdir()
    for fid in ("f0", "f1"):
        tensor_io.write_tensor(np.zeros((48, 64), np.uint16), gt_dir / f"{fid}.tns")
    bank = tmp_path / "bank.bin"
    assert pipeline_cli.main(["register", "--manifest", str(manifest),
                              "--gt-dir", str(gt_dir), "--out", str(bank)]) == 0

    # pass 1: dry run emits the prompt list
    pred = tmp_path / "pred"
    assert pipeline_cli.main(["segment", "--manifest", str(manifest),
                              "--bank", str(bank), "--out", str(pred),
                              "--emit-prompts"]) == 0
    prompts = pred / "prompts.txt"
    assert jobs.parse_prompts(prompts)

    # pass 2: fill the score cache, then segmentation completes
    assert cli.main(["export-scores", "--frames", str(frames_file),
                     "--out", str(out), "--prompts", str(prompts)]) == 0
    assert list((out / "scores").glob("*.tns"))
    assert pipeline_cli.main(["segment", "--manifest", str(manifest),
                              "--bank", str(bank), "--out", str(pred)]) == 0
    label = tensor_io.read_tensor(pred / "f0.tns")
    assert label.shape == (48, 64) and label.dtype == np.uint16


def test_export_scores_unknown_frame(stubbed, dataset, tmp_path):
    frames_file, _ = dataset
    prompts = tmp_path / "prompts.txt"
    prompts.write_text("nope\t1\t3,4;5,6\n")
    out = tmp_path / "export"
    out.mkdir()
    rc = cli.main(["export-scores", "--frames", str(frames_file),
                   "--out", str(out), "--prompts", str(prompts)])
    assert rc == 1
    assert "nope/1" in (out / "errors.txt").read_text()


def test_parse_frames_rejects_malformed(tmp_path):
    bad = tmp_path / "frames.tsv"
    bad.write_text("only_one_field\n")
    with pytest.raises(ValueError):
        jobs.parse_frames(bad)


def test_parse_prompts_format(tmp_path):
    p = tmp_path / "p.txt"
    p.write_text("# header\nf0\t2\t10,20;30,40\n")
    assert jobs.parse_prompts(p) == [("f0", 2, [(10, 20), (30, 40)])]
