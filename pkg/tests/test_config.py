import pytest

from acqkd.config import ConfigError, load_config, parse_config
from acqkd.linkmodel import preset


def test_full_file():
    cfg = parse_config("""
[run]
n_pulses = 2000000
seed = 0x10
workers = 2
[channel]
preset = 10km
mu = 0.05, 0.1, 0.3
contrast = 500
[detector]
eta_b = 0.15
[protocol]
row_lengths = 30,40
subset_stop_rounds = 10
n_checks = 40
timeout = 5
[security]
estimator = gh
safety = 20
""")
    run = cfg.run
    assert run.mu_list == (0.05, 0.1, 0.3)
    assert (run.n_pulses, run.seed, run.workers) == (2_000_000, 16, 2)
    assert run.channel.contrast == 500 and run.channel.eta_t == preset("10km")[0].eta_t
    assert run.detector.eta_b == 0.15 and run.detector.dark_rate_d0 == 40
    assert run.row_lengths == (30, 40) and run.subset_stop_rounds == 10 and run.n_checks == 40
    assert (run.estimator, run.safety, cfg.timeout) == ("gh", 20, 5.0)


def test_twenty_km_preset_rows():
    assert parse_config("[channel]\npreset = 20km\n").run.row_lengths == (12, 18, 27)


def test_loss_db():
    cfg = parse_config("[channel]\nloss_db = 14\n")
    assert cfg.run.channel.eta_t == pytest.approx(10**-1.4)


def test_defaults_when_empty():
    cfg = parse_config("")
    assert cfg.run.estimator == "bb84" and cfg.timeout == 30.0 and cfg.transcript is None


@pytest.mark.parametrize("text", [
    "[channel]\nmuu = 0.3\n",
    "[chanel]\nmu = 0.3\n",
    "[channel]\nmu = abc\n",
    "[channel]\neta_t = 1.5\n",
    "[channel]\neta_t = 0.1\nloss_db = 10\n",
    "[channel]\npreset = 15km\n",
    "[security]\nestimator = magic\n",
    "[protocol]\nrow_lengths = 1, 2\n",
    "[run]\nn_pulses = 0\n",
    "mu = 0.3\n",
    "[run]\nseed = 1\n[run]\nseed = 2\n",
])
def test_errors(text):
    with pytest.raises(ConfigError):
        parse_config(text)


def test_missing_file(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "nope.ini")
