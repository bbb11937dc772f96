from __future__ import annotations

import pytest

from smgarn.errors import ConfigFileError
from smgarn.schemas import GuidanceCase, GuidanceMode, ScaleMode, SynthParams
from smgarn.services.config_file import load_experiment_config, load_synth_params, parse_experiment_config


EXAMPLE = """\
# tiny desk run
embed_dim = 32
guidance_case = case3_full
masknet.use_sa = false
marb.count = 2
gfnet.guidance_mode = concat

epochs = 4
patch_size = 64   # crop
lambda = 0.5
betas = 0.8, 0.99
grad_clip_norm = none
"""


def test_parses_model_and_training_keys():
    model_cfg, train_cfg = parse_experiment_config(EXAMPLE)
    assert model_cfg.embed_dim == 32
    assert model_cfg.marb.channels == 32
    assert model_cfg.guidance_case is GuidanceCase.case3_full
    assert model_cfg.masknet.use_sa is False and model_cfg.masknet.use_ca is True
    assert model_cfg.marb.count == 2
    assert model_cfg.gfnet.guidance_mode is GuidanceMode.concat
    assert train_cfg.epochs == 4
    assert train_cfg.patch_size == 64
    assert train_cfg.lambda_mask == 0.5
    assert train_cfg.betas == (0.8, 0.99)
    assert train_cfg.grad_clip_norm is None


def test_empty_file_gives_defaults():
    model_cfg, train_cfg = parse_experiment_config("# nothing\n")
    assert model_cfg.embed_dim == 112
    assert train_cfg.batch_size == 16 and train_cfg.lr_init == 1e-4 and train_cfg.lr_halve_every == 100


def test_variant_is_applied_on_top():
    model_cfg, _ = parse_experiment_config("embed_dim = 8\nvariant = marb_ss_sa\n")
    assert model_cfg.variant == "marb_ss_sa"
    assert model_cfg.marb.scale_mode is ScaleMode.single
    assert model_cfg.marb.channels == 8


@pytest.mark.parametrize(
    "text, line",
    [
        ("embed_dim = 8\nthis is not a pair\n", 2),
        ("embed_dim = 8\n\nmarb.bogus = 1\n", 3),
        ("epochs = 2\nepochs = 3\n", 2),
        ("embed_dim = 8\nbatch_size = many\n", 2),
        ("guidance_case = case9\n", 1),
        ("embed_dim = 8\nvariant = nope\n", 2),
        ("# header\nunknown_key = 1\n", 2),
        ("epochs =\n", 1),
    ],
)
def test_errors_name_the_line(text, line):
    with pytest.raises(ConfigFileError) as exc:
        parse_experiment_config(text)
    assert exc.value.line == line
    assert str(exc.value).startswith(f"line {line}:")


def test_load_from_file(tmp_path):
    path = tmp_path / "exp.cfg"
    path.write_text(EXAMPLE, encoding="utf-8")
    model_cfg, train_cfg = load_experiment_config(path)
    assert model_cfg.embed_dim == 32 and train_cfg.epochs == 4


def test_synth_params_file(tmp_path):
    path = tmp_path / "synth.cfg"
    path.write_text("flake_count_range = 5, 10\nbinary_mask = true\nseed = 3\n", encoding="utf-8")
    params = load_synth_params(path, seed=9)
    assert params == SynthParams(flake_count_range=(5, 10), binary_mask=True, seed=9)


def test_synth_params_unknown_key(tmp_path):
    path = tmp_path / "synth.cfg"
    path.write_text("seed = 1\nflakes = 3\n", encoding="utf-8")
    with pytest.raises(ConfigFileError) as exc:
        load_synth_params(path)
    assert exc.value.line == 2
