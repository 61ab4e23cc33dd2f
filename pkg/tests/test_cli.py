import numpy as np
import pytest

from collabtrack import cli, network as nn
from collabtrack.errors import ConfigError
from collabtrack.imagery import read_pgm, write_pgm


def run_cli(*args):
    return cli.main(list(args))


def synth_args(out_dir, frames=8, seed=5, extra=()):
    args = [
        "synth",
        "--set", f"sequence_dir={out_dir}",
        "--set", f"synth_frames={frames}",
        "--set", f"seed={seed}",
    ]
    for item in extra:
        args += ["--set", item]
    return args


def small_track_sets(seq, model, traj, particles=40):
    return [
        "--set", f"sequence_dir={seq}",
        "--set", f"ground_truth={seq}/groundtruth.txt",
        "--set", f"model_file={model}",
        "--set", f"trajectory={traj}",
        "--set", f"particles={particles}",
    ]


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    """One tiny synth sequence plus a pretrained model, shared by the tests."""
    root = tmp_path_factory.mktemp("cli")
    seq = root / "seq"
    assert run_cli(*synth_args(seq, frames=10)) == 0
    model = root / "model.cdtm"
    code = run_cli(
        "pretrain",
        "--set", f"train_sequences={seq}:{seq}/groundtruth.txt",
        "--set", f"model_file={model}",
        "--set", "pretrain_epochs_per_layer=1",
        "--set", "offline_epochs=2",
        "--set", "seed=1",
    )
    assert code == 0
    return root, seq, model


class TestConfig:
    def test_defaults_complete(self):
        cfg = cli.merge_config()
        assert cfg["tau"] == "0.8"
        assert cfg["chi"] == "0.8"
        assert cfg["particles"] == "600"
        assert cfg["learning_rate"] == "0.002"
        assert cfg["momentum"] == "0.9"
        assert cfg["variances"] == "6,6,0.01,0,0,0"

    def test_file_overrides_defaults(self, tmp_path):
        p = tmp_path / "run.cfg"
        p.write_text("tau = 0.5\n# comment line\nparticles=100\n")
        cfg = cli.merge_config(cli.parse_config_file(p))
        assert cfg["tau"] == "0.5"
        assert cfg["particles"] == "100"
        assert cfg["chi"] == "0.8"

    def test_set_overrides_file(self, tmp_path):
        p = tmp_path / "run.cfg"
        p.write_text("tau=0.5\n")
        cfg = cli.merge_config(cli.parse_config_file(p), {"tau": "0.6"})
        assert cfg["tau"] == "0.6"

    def test_unknown_key_named(self):
        with pytest.raises(ConfigError, match="taau"):
            cli.merge_config({}, {"taau": "0.8"})

    def test_env_seed_wins(self, monkeypatch):
        monkeypatch.setenv(cli.SEED_ENV_VAR, "777")
        cfg = cli.merge_config({}, {"seed": "5"})
        assert cfg["seed"] == "777"

    def test_tracker_config_defaults_match_reference_values(self):
        tc = cli.tracker_config(cli.merge_config())
        assert tc.tau == 0.8 and tc.chi == 0.8
        assert tc.particle_count == 600
        assert tc.learning_rate == 0.002 and tc.momentum == 0.9
        assert tc.variances == (6.0, 6.0, 0.01, 0.0, 0.0, 0.0)
        assert tc.update_interval == 5
        assert tc.eigenvectors_per_block == 16

    def test_bad_value_is_config_error(self):
        with pytest.raises(ConfigError, match="particles"):
            cli.tracker_config(cli.merge_config({}, {"particles": "many"}))


class TestSynthCommand:
    def test_writes_frames_and_truth(self, tmp_path):
        out = tmp_path / "s"
        assert run_cli(*synth_args(out, frames=12)) == 0
        assert len(sorted(out.glob("*.pgm"))) == 12
        assert len((out / "groundtruth.txt").read_text().splitlines()) == 12

    def test_config_file_with_set_override(self, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text(
            f"sequence_dir={tmp_path / 'from_file'}\nsynth_frames=4\nseed=3\n"
        )
        out = tmp_path / "overridden"
        code = run_cli(
            "synth", "--config", str(cfg), "--set", f"sequence_dir={out}"
        )
        assert code == 0
        assert len(sorted(out.glob("*.pgm"))) == 4  # frame count from the file
        assert not (tmp_path / "from_file").exists()  # path overridden by --set

    def test_missing_config_file_is_usage_error(self, tmp_path):
        assert run_cli("synth", "--config", str(tmp_path / "no.cfg")) == cli.EXIT_USAGE

    def test_same_seed_same_bytes(self, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        run_cli(*synth_args(a, frames=5, seed=9))
        run_cli(*synth_args(b, frames=5, seed=9))
        for fa, fb in zip(sorted(a.glob("*.pgm")), sorted(b.glob("*.pgm"))):
            assert fa.read_bytes() == fb.read_bytes()


class TestPretrainCommand:
    def test_model_has_reference_architecture(self, workspace):
        _, _, model = workspace
        params = nn.load_model(model)
        assert params.dims == (1024, 256, 64, 16, 1)

    def test_missing_sequences_is_usage_error(self):
        assert run_cli("pretrain") == cli.EXIT_USAGE


class TestTrackCommand:
    def test_writes_trajectory(self, workspace, tmp_path):
        root, seq, model = workspace
        traj = tmp_path / "t.csv"
        assert run_cli("track", *small_track_sets(seq, model, traj)) == 0
        lines = traj.read_text().splitlines()
        assert lines[0].startswith("frame,x,y,w,h")
        assert len(lines) == 11

    def test_single_frame_sequence(self, workspace, tmp_path):
        root, seq, model = workspace
        single = tmp_path / "single"
        run_cli(*synth_args(single, frames=1, seed=2))
        traj = tmp_path / "one.csv"
        assert run_cli("track", *small_track_sets(single, model, traj)) == 0
        lines = traj.read_text().splitlines()
        assert len(lines) == 2
        first = (single / "groundtruth.txt").read_text().splitlines()[0].split(",")
        fields = lines[1].split(",")
        assert float(fields[1]) == pytest.approx(float(first[0]))

    def test_init_box_spanning_whole_frame(self, workspace, tmp_path):
        _, _, model = workspace
        d = tmp_path / "tiny"
        d.mkdir()
        rng = np.random.default_rng(0)
        for i in range(2):
            write_pgm(d / f"{i}.pgm", rng.integers(0, 255, (32, 32), dtype=np.uint8))
        traj = tmp_path / "tiny.csv"
        code = run_cli(
            "track",
            "--set", f"sequence_dir={d}",
            "--set", f"model_file={model}",
            "--set", f"trajectory={traj}",
            "--set", "init_box=0,0,32,32",
            "--set", "particles=20",
        )
        assert code == 0

    def test_deterministic_bytes(self, workspace, tmp_path):
        root, seq, model = workspace
        outs = []
        for name in ("r1.csv", "r2.csv"):
            traj = tmp_path / name
            assert run_cli(
                "track", *small_track_sets(seq, model, traj), "--set", "seed=11"
            ) == 0
            outs.append(traj.read_bytes())
        assert outs[0] == outs[1]

    def test_corrupt_model_is_data_error(self, workspace, tmp_path):
        root, seq, _ = workspace
        bad = tmp_path / "bad.cdtm"
        bad.write_bytes(b"WXYZ" + bytes(100))
        code = run_cli("track", *small_track_sets(seq, bad, tmp_path / "t.csv"))
        assert code == cli.EXIT_DATA

    def test_nan_model_is_numeric_error(self, workspace, tmp_path):
        root, seq, _ = workspace
        params = nn.NetworkParams.init(nn.ARCHITECTURE, np.random.default_rng(0))
        params.layers[0].weights[0, 0] = np.nan
        poisoned = tmp_path / "nan.cdtm"
        nn.save_model(params, poisoned)
        code = run_cli("track", *small_track_sets(seq, poisoned, tmp_path / "t.csv"))
        assert code == cli.EXIT_NUMERIC


class TestEvalCommand:
    def test_perfect_trajectory_scores(self, workspace, tmp_path, capsys):
        root, seq, _ = workspace
        gt = seq / "groundtruth.txt"
        traj = tmp_path / "perfect.csv"
        rows = ["frame,x,y,w,h,score,occlusion_rate,finetuned"]
        for i, line in enumerate(gt.read_text().splitlines()):
            x, y, w, h = line.split(",")
            rows.append(f"{i},{x},{y},{w},{h},1.0,1.0,0")
        traj.write_text("\n".join(rows) + "\n")
        report = tmp_path / "report.csv"
        code = run_cli(
            "eval",
            "--set", f"trajectory={traj}",
            "--set", f"ground_truth={gt}",
            "--set", f"report={report}",
        )
        assert code == 0
        last = report.read_text().splitlines()[-1]
        assert last == "average,0.000000,1.000000"

    def test_row_count_mismatch_names_both(self, workspace, tmp_path, capsys):
        root, seq, _ = workspace
        gt = seq / "groundtruth.txt"
        traj = tmp_path / "short.csv"
        traj.write_text(
            "frame,x,y,w,h,score,occlusion_rate,finetuned\n0,1,1,5,5,1,1,0\n"
        )
        code = run_cli(
            "eval", "--set", f"trajectory={traj}", "--set", f"ground_truth={gt}"
        )
        assert code == cli.EXIT_DATA
        err = capsys.readouterr().err
        assert "1" in err and "10" in err

    def test_malformed_line_cited(self, tmp_path, capsys):
        gt = tmp_path / "gt.txt"
        gt.write_text("1,1,5,5\n" * 6 + "oops\n")
        traj = tmp_path / "t.csv"
        traj.write_text("frame,x,y,w,h\n" + "0,1,1,5,5\n" * 7)
        code = run_cli("eval", "--set", f"trajectory={traj}", "--set", f"ground_truth={gt}")
        assert code == cli.EXIT_DATA
        assert "line 7" in capsys.readouterr().err


class TestDumpFiltersCommand:
    def test_writes_256_filter_images(self, workspace, tmp_path):
        _, _, model = workspace
        out = tmp_path / "filters"
        code = run_cli(
            "dump-filters",
            "--set", f"model_file={model}",
            "--set", f"filters_dir={out}",
        )
        assert code == 0
        files = sorted(out.glob("*.pgm"))
        assert len(files) == 256
        img = read_pgm(files[0])
        assert img.shape == (32, 32)
        assert img.min() == 0 and img.max() == 255

    def test_constant_column_is_mid_gray(self, tmp_path):
        params = nn.NetworkParams.init((1024, 4, 2, 2, 1), np.random.default_rng(0))
        params.layers[0].weights[:, 2] = 0.25
        model = tmp_path / "m.cdtm"
        nn.save_model(params, model)
        out = tmp_path / "f"
        assert run_cli(
            "dump-filters", "--set", f"model_file={model}", "--set", f"filters_dir={out}"
        ) == 0
        img = read_pgm(out / "filter_002.pgm")
        assert np.all(img == 128)


class TestExitCodes:
    def test_unknown_key_is_usage(self, capsys):
        assert run_cli("synth", "--set", "bogus=1") == cli.EXIT_USAGE
        assert "bogus" in capsys.readouterr().err

    def test_bad_set_syntax_is_usage(self):
        assert run_cli("synth", "--set", "no-equals") == cli.EXIT_USAGE

    def test_unknown_command_exits_one(self):
        with pytest.raises(SystemExit) as info:
            run_cli("frobnicate")
        assert info.value.code == cli.EXIT_USAGE

    def test_missing_sequence_dir_is_data_error(self, workspace, tmp_path):
        _, _, model = workspace
        code = run_cli(
            "track",
            "--set", "sequence_dir=/nonexistent/place",
            "--set", f"model_file={model}",
            "--set", "init_box=0,0,8,8",
            "--set", f"trajectory={tmp_path/'t.csv'}",
        )
        assert code == cli.EXIT_DATA
