import os

import pytest

from config import Config, TrainConfig, load_train_config, parse_train_config
from degradation.bank import SeverityBank
from losses.objectives import LossWeights
from utils.errors import ConfigError

CONFIG_DIR = os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), 'configs')


class TestParseTrainConfig:
    def test_sections_and_comments(self):
        cfg = parse_train_config(
            "# short run\n[train]\ngamma_e = 0.01  ; faster\ntotal_epochs = 4\nstrategy = Average\n"
            "[loss]\nbeta = 0\n[bank]\nlowres = 4\n[network]\nwidth = 8\n"
        )
        assert cfg.gamma_e == 0.01 and cfg.total_epochs == 4 and cfg.strategy == 'average'
        assert cfg.loss_weights == LossWeights(alpha=0.75, beta=0.0)
        assert cfg.bank.lowres == (4,) and cfg.bank.stripe == SeverityBank().stripe
        assert cfg.width == 8

    def test_unknown_key_names_the_line(self):
        with pytest.raises(ConfigError, match=r"<string>:3: unknown key 'momentum'"):
            parse_train_config("[train]\nseed = 1\nmomentum = 0.9\n")

    def test_unknown_section(self):
        with pytest.raises(ConfigError, match="unknown section"):
            parse_train_config("[optimizer]\n")

    def test_key_outside_section(self):
        with pytest.raises(ConfigError, match=":1:"):
            parse_train_config("seed = 3\n")

    def test_bad_value(self):
        with pytest.raises(ConfigError, match="batch_size"):
            parse_train_config("[train]\nbatch_size = four\n")

    def test_bad_bank(self):
        with pytest.raises(ConfigError):
            parse_train_config("[bank]\nstripe = 0.9\n")

    def test_text_round_trip(self):
        cfg = TrainConfig(gamma_e=3e-4, warm_epochs=2, total_epochs=9, strategy='all', train_subset=5,
                          loss_weights=LossWeights(1.0, 0.5),
                          bank=SeverityBank(stripe=(0.05,), lowres=(2, 4), contrast=((0.4, 2.0),)),
                          width=6, time_steps=3, tau=0.25)
        assert parse_train_config(cfg.to_text()) == cfg

    def test_shipped_configs_parse(self):
        desk = load_train_config(os.path.join(CONFIG_DIR, 'desk.cfg'))
        smoke = load_train_config(os.path.join(CONFIG_DIR, 'smoke.cfg'))
        assert desk.total_epochs == 30 and desk.gamma_e == pytest.approx(1e-3)
        assert (desk.steps, desk.resolved_warm_epochs) == (1, 3) and desk.gamma_g == pytest.approx(0.05)
        assert smoke.total_epochs == 2

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError):
            load_train_config(str(tmp_path / "absent.cfg"))


class TestValidation:
    @pytest.mark.parametrize("overrides", [
        {'gamma_e': -1.0},
        {'warm_epochs': 5, 'total_epochs': 3},
        {'batch_size': 0},
        {'strategy': 'random'},
        {'lambda_reg': -0.1},
        {'train_subset': 0},
        {'divergence_factor': 1.0},
        {'tau': 1.0},
        {'v_th': 0.0},
    ])
    def test_rejects(self, overrides):
        with pytest.raises(ConfigError):
            TrainConfig(**overrides).validate()

    def test_zero_learning_rates_allowed(self):
        TrainConfig(gamma_e=0.0, gamma_g=0.0).validate()

    @pytest.mark.parametrize("total, warm", [(30, 1), (40, 2), (1, 1), (0, 0), (100, 5)])
    def test_default_warm_epochs(self, total, warm):
        assert TrainConfig(total_epochs=total).resolved_warm_epochs == warm

    def test_explicit_warm_epochs(self):
        assert TrainConfig(total_epochs=10, warm_epochs=0).resolved_warm_epochs == 0

    def test_log_level_validation(self, monkeypatch):
        monkeypatch.setattr(Config, 'LOG_LEVEL', 'CHATTY')
        with pytest.raises(ValueError):
            Config.validate_log_level()
