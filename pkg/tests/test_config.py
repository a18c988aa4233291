import pytest

from socialreward.config import RunConfig, load_config, parse_config
from socialreward.core import Modality
from socialreward.errors import ConfigError


def test_defaults_match_empty_file():
    assert parse_config("") == RunConfig.default()


def test_non_unit_weights_rejected():
    with pytest.raises(ConfigError, match="unit L2 norm"):
        parse_config("[fusion]\nw_fer = happiness:1, anger:-1\n")


def test_normalize_weights_option():
    cfg = parse_config("[fusion]\nnormalize_weights = yes\nw_fer = happiness:3, anger:-4\n")
    assert cfg.fusion.w_fer[cfg.taxonomy.index("happiness")] == pytest.approx(0.6)
    assert cfg.fusion.w_fer[cfg.taxonomy.index("anger")] == pytest.approx(-0.8)


@pytest.mark.parametrize(
    "text",
    [
        "[fusion]\nk_fer = 1\nbogus = 2\n",
        "[nonsense]\nx = 1\n",
        "[fusion]\nk_fer = abc\n",
        "[fusion]\ntick_period_ms = 0\n",
        "[fusion]\nk_fer = inf\n",
        "[fusion]\nw_ser = joy:1\n",
        "[channel:x]\nlabels = a\n",
        "[channel:x]\nmodality = SMELL\n",
        "[channel:x]\nmodality = SER\nlabels = calm, happiness\nmap = happiness:happiness\n",
        "[eval]\ntest_fraction = 1.5\n",
        "[fusion\n",
    ],
)
def test_bad_configs(text):
    with pytest.raises(ConfigError):
        parse_config(text)


def test_channel_sections_and_mapping():
    cfg = parse_config(
        """
[channel:ser_ravdess]
modality = SER
labels = neutral, calm, happy, sad, angry, fearful, disgust, surprised
map = neutral:neutral, calm:DROP, happy:happiness, sad:sadness, angry:anger,
      fearful:fear, disgust:disgust, surprised:surprise

[channel:cam]
modality = presence

[output]
rewards = out.srfr
"""
    )
    assert cfg.registry.modality("ser_ravdess") is Modality.SER
    assert cfg.registry.arity("ser_ravdess") == 8
    assert cfg.registry.modality("cam") is Modality.PRESENCE
    assert cfg.rewards_path == "out.srfr"


def test_load_config_missing_file(tmp_path):
    with pytest.raises(ConfigError):
        load_config(str(tmp_path / "absent.ini"))
    assert load_config(None) == RunConfig.default()
