import filecmp
import os

from relperceiver.cli import build_parser, main


def test_verbs_registered():
    p = build_parser()
    for verb in ("generate", "train", "evaluate", "ablate", "bench", "report"):
        assert p.parse_args(_minimal(verb)).verb == verb


def _minimal(verb):
    return {"generate": ["generate", "--out", "x"], "evaluate": ["evaluate", "c.ckpt"],
            "report": ["report", "c.ckpt"]}.get(verb, [verb])


def test_end_to_end(tmp_path, capsys):
    data = str(tmp_path / "data")
    assert main(["generate", "--out", data, "--seed", "1", "--n-users", "30",
                 "--examples-per-task", "120", "--tasks", "premium"]) == 0
    cfg = tmp_path / "run.cfg"
    cfg.write_text(f"data = {data}\nhidden_dim = 16\nepochs = 1\nbatch_size = 64\nheads = 2\n")
    for i in (1, 2):
        assert main(["train", "--config", str(cfg), "--out", str(tmp_path / f"r{i}"),
                     "--run-id", "x", "--seed", "3", "--deterministic"]) == 0
    ck1, ck2 = tmp_path / "r1" / "x.ckpt", tmp_path / "r2" / "x.ckpt"
    assert filecmp.cmp(ck1, ck2, shallow=False)
    capsys.readouterr()
    assert main(["evaluate", str(ck1)]) == 0
    assert capsys.readouterr().out.startswith("premium\ttest\t")
    assert main(["report", str(ck1), str(ck2), "--csv", str(tmp_path / "rep.csv")]) == 0
    assert "mean of 2" in capsys.readouterr().out
    assert main(["ablate", "--config", str(cfg), "--out", str(tmp_path / "abl"),
                 "--seeds", "1", "--arms", "full,no_temporal_sampler"]) == 0
    out = capsys.readouterr().out
    assert "no_temporal_sampler" in out
    assert os.path.exists(tmp_path / "abl" / "ablation.csv")


def test_bench_verb(capsys):
    assert main(["bench", "--sizes", "16,32", "--dim", "8", "--repeats", "1", "--kernels",
                 "--queries", "20"]) == 0
    out = capsys.readouterr().out
    assert out.startswith("N_g,K,L,mode,mean_ms,std_ms")
    assert "fitted exponent" in out and "python" in out


def test_bad_config_reports_error(tmp_path, capsys):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("num_latents = 5\n")
    assert main(["train", "--config", str(cfg)]) == 2
    assert "num_latents" in capsys.readouterr().err
