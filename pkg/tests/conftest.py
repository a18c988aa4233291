import pathlib

import pytest

from socialreward.config import RunConfig
from socialreward.core import EmotionTaxonomy, FusionConfig, Modality
from socialreward.stream import ChannelRegistry

DATA = pathlib.Path(__file__).resolve().parents[1] / "src" / "socialreward" / "data"


@pytest.fixture(scope="session")
def taxonomy():
    return EmotionTaxonomy()


@pytest.fixture(scope="session")
def cfg(taxonomy):
    return FusionConfig.default(taxonomy)


@pytest.fixture(scope="session")
def registry(taxonomy):
    return ChannelRegistry.identity(
        taxonomy,
        {
            "fer_rmn": Modality.FER,
            "fer_b": Modality.FER,
            "ser_erus": Modality.SER,
            "ser_b": Modality.SER,
            "presence_cam": Modality.PRESENCE,
            "presence_mic": Modality.PRESENCE,
        },
    )


@pytest.fixture
def run_config():
    return RunConfig.default()


@pytest.fixture
def data_dir():
    return DATA


def pytest_terminal_summary(terminalreporter):
    from . import test_acceptance

    if test_acceptance.RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in test_acceptance.RESULTS:
            terminalreporter.write_line(line)
