import numpy as np
import pytest

from ktrecon import DOMAIN_IMAGE, DOMAIN_KSPACE
from ktrecon.cli import main
from ktrecon.io import load_mask, load_tensor

CFG = """
seed = 1
phantom.frames = 6
phantom.height = 24
phantom.width = 24
maps.coils = 3
mask.type = vista
mask.accel = 4
mask.center_band = 4
acquire.noise = 0
recon.mode = classical
recon.nit = 6
recon.lambda0 = 0.05
recon.alpha0 = 0.1
recon.beta0 = 0.3
recon.tau_xf = 0.08
recon.tau_xt = 0.06
eval.margin = 2
"""


@pytest.fixture()
def cfg_file(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text(CFG)
    return path


def test_mask_lattice_r1_is_all_ones(tmp_path):
    out = tmp_path / "mask.cxt"
    rc = main(["mask", "--type", "lattice", "--accel", "1", "--frames", "4",
               "--height", "16", "--out", str(out)])
    assert rc == 0
    mask = load_mask(out)
    assert np.all(mask.data == 1)


def test_phantom_writes_all_artifacts(tmp_path, cfg_file, capsys):
    rc = main(["phantom", "--config", str(cfg_file),
               "--outdir", str(tmp_path / "data")])
    assert rc == 0
    for name in ("gt.cxt", "maps.cxt", "mask.cxt", "kdata.cxt"):
        assert (tmp_path / "data" / name).exists()


def test_full_pipeline_and_reports(tmp_path, cfg_file):
    data = tmp_path / "data"
    assert main(["phantom", "--config", str(cfg_file),
                 "--outdir", str(data)]) == 0
    assert main(["recon", "--config", str(cfg_file),
                 "--input", str(data / "kdata.cxt"),
                 "--mask", f"file:{data / 'mask.cxt'}",
                 "--maps", str(data / "maps.cxt"),
                 "--out", str(data / "recon.cxt"),
                 "--trace", str(data / "trace.csv")]) == 0
    assert main(["eval", "--config", str(cfg_file),
                 "--recon", str(data / "recon.cxt"),
                 "--gt", str(data / "gt.cxt"),
                 "--out", str(data / "report.csv")]) == 0
    assert main(["export", "--input", str(data / "recon.cxt"), "--frame", "2",
                 "--out", str(data / "frame.png")]) == 0

    report = (data / "report.csv").read_text().splitlines()
    assert report[0] == "sequence,nmse,psnr_db,ssim,hfen"
    fields = report[1].split(",")
    assert float(fields[1]) >= 0
    frames = (data / "report_frames.csv").read_text().splitlines()
    assert len(frames) == 1 + 6  # header + one row per frame
    # report figures rendered next to the CSV
    assert (data / "report_frames.png").exists()
    assert (data / "report_error.png").exists()
    assert (data / "trace.csv").exists()
    assert (data / "trace.png").exists()
    # the trace is non-increasing
    vals = [float(r.split(",")[1])
            for r in (data / "trace.csv").read_text().splitlines()[1:]]
    assert all(b <= a * (1 + 1e-9) for a, b in zip(vals, vals[1:]))


def test_recon_output_loadable(tmp_path, cfg_file):
    data = tmp_path / "d"
    main(["phantom", "--config", str(cfg_file), "--outdir", str(data)])
    main(["recon", "--config", str(cfg_file),
          "--input", str(data / "kdata.cxt"),
          "--mask", f"file:{data / 'mask.cxt'}",
          "--maps", str(data / "maps.cxt"),
          "--out", str(data / "recon.cxt")])
    m = load_tensor(data / "recon.cxt", DOMAIN_IMAGE)
    assert m.shape == (6, 24, 24)


def test_missing_input_nonzero_exit(tmp_path, capsys):
    rc = main(["recon", "--input", str(tmp_path / "no.cxt"),
               "--mask", "lattice", "--maps", str(tmp_path / "no2.cxt"),
               "--out", str(tmp_path / "o.cxt")])
    assert rc == 1
    err = capsys.readouterr().err
    assert "error:" in err and "no.cxt" in err


def test_unknown_subcommand_usage_exit():
    with pytest.raises(SystemExit) as exc:
        main(["frobnicate"])
    assert exc.value.code == 2


def test_unknown_flag_usage_exit():
    with pytest.raises(SystemExit) as exc:
        main(["mask", "--nonsense", "3"])
    assert exc.value.code == 2


def test_maps_and_acquire_roundtrip(tmp_path, cfg_file):
    data = tmp_path / "x"
    data.mkdir()
    assert main(["phantom", "--config", str(cfg_file),
                 "--outdir", str(data)]) == 0
    assert main(["maps", "--coils", "2", "--height", "24", "--width", "24",
                 "--out", str(data / "maps2.cxt")]) == 0
    assert main(["acquire", "--gt", str(data / "gt.cxt"),
                 "--maps", str(data / "maps2.cxt"),
                 "--mask", "lattice", "--accel", "4",
                 "--out", str(data / "k2.cxt")]) == 0
    v = load_tensor(data / "k2.cxt", DOMAIN_KSPACE)
    assert v.shape == (2, 6, 24, 24)


def test_train_and_learned_recon(tmp_path):
    ckpt = tmp_path / "nets.ckpt"
    assert main(["train", "--steps", "3", "--hidden", "3", "--sequences", "1",
                 "--frames", "4", "--height", "12", "--width", "12",
                 "--coils", "2", "--accel", "2", "--ckpt", str(ckpt)]) == 0
    assert ckpt.exists()
    assert (tmp_path / "nets.loss.csv").exists()

    data = tmp_path / "d"
    cfg = tmp_path / "c.cfg"
    cfg.write_text("seed = 0\nphantom.frames = 4\nphantom.height = 12\n"
                   "phantom.width = 12\nmaps.coils = 2\nmask.type = lattice\n"
                   "mask.accel = 2\n")
    assert main(["phantom", "--config", str(cfg), "--outdir", str(data)]) == 0
    assert main(["recon", "--input", str(data / "kdata.cxt"),
                 "--mask", f"file:{data / 'mask.cxt'}",
                 "--maps", str(data / "maps.cxt"),
                 "--mode", "learned", "--ckpt", str(ckpt), "--nit", "2",
                 "--out", str(data / "rl.cxt")]) == 0
    m = load_tensor(data / "rl.cxt", DOMAIN_IMAGE)
    assert np.all(np.isfinite(m.data.view(np.float64)))


def test_help_lists_all_subcommands(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["--help"])
    assert exc.value.code == 0
    out = capsys.readouterr().out
    for sub in ("phantom", "maps", "mask", "acquire", "recon", "train",
                "eval", "export"):
        assert sub in out


def test_flag_help_names_config_keys(capsys):
    with pytest.raises(SystemExit):
        main(["recon", "--help"])
    out = capsys.readouterr().out
    assert "[recon.lambda0]" in out
    assert "[recon.tau_xf]" in out
