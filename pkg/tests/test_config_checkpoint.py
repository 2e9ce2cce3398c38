import json

import numpy as np
import pytest

from mstct.checkpoint import CheckpointError, load_checkpoint, read_index, save_checkpoint
from mstct.config import RunConfig, build_run_config, parse_assignments
from mstct.model import ModelConfig, desk_config, init_params
from mstct.numerics import ConfigError


class TestConfigParsing:
    def test_model_and_run_keys(self):
        m, r = parse_assignments(["H=2", "lr=0.001", "use_mixer=off", "taus=0,5"])
        assert m == {"H": 2, "use_mixer": False}
        assert r == {"lr": 0.001, "taus": (0, 5)}

    def test_aliases_and_fractions(self):
        m, _ = parse_assignments(["global=false", "sigma=1/8", "kernel=5"])
        assert m == {"use_global": False, "sigma_ratio": 0.125, "k": 5}

    def test_positional_embedding_auto(self):
        m, _ = parse_assignments(["positional_embedding=auto"])
        assert m == {"positional_embedding": None}

    @pytest.mark.parametrize("pair", ["bogus=1", "H", "H=two", "use_global=maybe"])
    def test_rejects(self, pair):
        with pytest.raises(ConfigError):
            parse_assignments([pair])

    def test_file_with_comments_and_overrides(self, tmp_path):
        f = tmp_path / "run.cfg"
        f.write_text("# desk run\nepochs = 3   # short\nH = 2\n\nstage_type = pure_convolution\n")
        run = build_run_config(f, ["H=8"])
        assert run.epochs == 3 and run.model.H == 8 and run.model.stage_type == "pure_convolution"

    def test_text_round_trip(self, tmp_path):
        run = build_run_config(None, ["use_local=false", "lr=0.0005", "taus=1,2", "theta=2"])
        f = tmp_path / "c.txt"
        f.write_text(run.to_text())
        assert build_run_config(f) == run

    def test_invalid_combination(self):
        with pytest.raises(ConfigError, match="divisible"):
            build_run_config(None, ["H=3"])

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError, match="not found"):
            build_run_config(tmp_path / "nope.cfg")

    @pytest.mark.parametrize("kw", [dict(lr=0), dict(lr_factor=1.0), dict(epochs=0), dict(val_fraction=1.0)])
    def test_run_validation(self, kw):
        with pytest.raises(ConfigError):
            RunConfig(**kw)

    def test_default_stride_is_half_window(self):
        assert RunConfig().stride == desk_config().T // 2


class TestCheckpoint:
    def test_round_trip_is_identity(self, tmp_path):
        cfg = desk_config(H=2, stage_type="pure_transformer")
        p = init_params(cfg, seed=4)
        save_checkpoint(tmp_path / "ck", p, cfg, extra={"note": 1})
        q, cfg2 = load_checkpoint(tmp_path / "ck.json")
        assert cfg2 == cfg and list(q) == list(p)
        for k in p:
            assert q[k].data.dtype == np.float64 and np.array_equal(q[k].data, p[k].data)
        assert read_index(tmp_path / "ck")["extra"] == {"note": 1}

    def test_blob_is_little_endian_float64(self, tmp_path):
        cfg = desk_config()
        p = init_params(cfg, 0)
        save_checkpoint(tmp_path / "ck", p, cfg)
        raw = (tmp_path / "ck.bin").read_bytes()
        assert len(raw) == 8 * p.num_parameters()
        first = next(iter(p.values()))
        np.testing.assert_array_equal(np.frombuffer(raw[: 8 * first.size], "<f8"), first.data.ravel())

    def test_mismatch_reports_shapes(self, tmp_path):
        cfg = desk_config()
        save_checkpoint(tmp_path / "ck", init_params(cfg, 0), cfg)
        with pytest.raises(CheckpointError) as e:
            load_checkpoint(tmp_path / "ck", desk_config(D=48))
        assert "checkpoint (" in str(e.value) and "vs config" in str(e.value)

    def test_ablated_config_reports_missing(self, tmp_path):
        cfg = desk_config(use_mixer=False, use_heatmap_branch=False)
        save_checkpoint(tmp_path / "ck", init_params(cfg, 0), cfg)
        with pytest.raises(CheckpointError, match="missing mix"):
            load_checkpoint(tmp_path / "ck", desk_config())

    def test_missing_files(self, tmp_path):
        with pytest.raises(CheckpointError, match="index not found"):
            load_checkpoint(tmp_path / "none")
        cfg = desk_config()
        save_checkpoint(tmp_path / "ck", init_params(cfg, 0), cfg)
        (tmp_path / "ck.bin").unlink()
        with pytest.raises(CheckpointError, match="blob not found"):
            load_checkpoint(tmp_path / "ck")

    def test_truncated_blob(self, tmp_path):
        cfg = desk_config()
        save_checkpoint(tmp_path / "ck", init_params(cfg, 0), cfg)
        b = tmp_path / "ck.bin"
        b.write_bytes(b.read_bytes()[:-8])
        with pytest.raises(CheckpointError, match="too short"):
            load_checkpoint(tmp_path / "ck")

    def test_config_dict_round_trip(self):
        cfg = desk_config(heatmap_source="stage2", positional_embedding=True)
        assert ModelConfig.from_dict(json.loads(json.dumps(cfg.to_dict()))) == cfg
        with pytest.raises(ConfigError):
            ModelConfig.from_dict({**cfg.to_dict(), "extra": 1})
