import pytest

from stable_style.config import ExperimentConfig, load_config
from stable_style.errors import ConfigError


def test_defaults():
    cfg = load_config()
    assert cfg.vocab_size == 10000 and cfg.transfer.alpha == 0.7 and cfg.transfer.beta == 0.5
    assert cfg.eval_classifier.filter_widths == [2, 3, 4]
    assert cfg.eval_classifier.seed == cfg.seed + 1


def test_precedence(tmp_path):
    p = tmp_path / "c.yaml"
    p.write_text("seed: 3\ntrain:\n  epochs: 4\n  batch_size: 8\noutput_dir: from_yaml\n")
    cfg = load_config(str(p), ["train.epochs=6", "transfer.alpha=0.6"], seed=9, output_dir="from_flag")
    assert cfg.train.epochs == 6 and cfg.train.batch_size == 8
    assert cfg.transfer.alpha == 0.6
    assert cfg.seed == 9 and cfg.output_dir == "from_flag"
    # the global seed reaches every component that does not set its own
    assert cfg.train.seed == cfg.classifier.seed == cfg.lm.seed == 9
    assert cfg.eval_classifier.seed == 10


def test_component_seed_kept(tmp_path):
    cfg = load_config(None, ["seed=2", "classifier.seed=7"])
    assert cfg.classifier.seed == 7 and cfg.train.seed == 2


def test_unknown_key_rejected():
    with pytest.raises(ConfigError, match="bogus"):
        load_config(None, ["train.bogus=1"])
    with pytest.raises(ConfigError):
        load_config(None, ["noequals"])
    with pytest.raises(ConfigError):
        load_config("/nonexistent/config.yaml")


def test_invalid_values_rejected():
    with pytest.raises(ConfigError):
        load_config(None, ["train.reduction=median"])


def test_digest_tracks_content():
    a, b = load_config(), load_config(None, ["train.epochs=3"])
    assert a.digest() == load_config().digest() and a.digest() != b.digest()
    assert len(a.digest()) == 16


def test_validate_paths(tmp_path):
    cfg = load_config(None, [f"data.root={tmp_path / 'missing'}"])
    with pytest.raises(ConfigError):
        cfg.validate()
    cfg = load_config(None, [f"data.root={tmp_path}", "sweep.alpha_grid=[]"])
    with pytest.raises(ConfigError):
        cfg.validate()
    assert load_config(None, [f"data.root={tmp_path}"]).validate() is not None


def test_deleter_override():
    cfg = ExperimentConfig()
    assert cfg.deleter() == cfg.deleter(0.7, 0.5)
    assert cfg.deleter(0.6).alpha == 0.6 and cfg.deleter(0.6).beta == 0.5
