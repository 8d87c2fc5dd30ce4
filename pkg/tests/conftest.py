import numpy as np
import pytest

from cmr.mbcr import mbcr_build
from cmr.algebra import FieldSpec
from cmr.zigzag import zigzag_build
from cmr.secret import mbmr_scheme, msmr_zigzag_scheme


@pytest.fixture
def rng():
    return np.random.default_rng(7)


@pytest.fixture(scope="module")
def gf256():
    return FieldSpec.binary(8)


@pytest.fixture(scope="module")
def zigzag_63():
    return zigzag_build(3, 3, FieldSpec.binary(8), seed=0)


@pytest.fixture(scope="module")
def mbcr_6342():
    return mbcr_build(6, 3, 4, 2, FieldSpec.prime(257))


@pytest.fixture(scope="module")
def mbmr_small():
    """(4, 2, 2, 1) bivariate base, one eavesdropped share, over GF(5)"""
    return mbmr_scheme(4, 1, 1, 2, field=FieldSpec.prime(5))


@pytest.fixture(scope="module")
def msmr_small():
    """(6, 3) zigzag base with two punctured nodes and one eavesdropped share"""
    return msmr_zigzag_scheme(3, 1, 2, field=FieldSpec.binary(8), seed=0)


@pytest.fixture
def config_dir(tmp_path, monkeypatch):
    """Points Config at an empty directory and clears any CMR_* overrides"""
    for key in ("CMR_FIELD", "CMR_SEED", "CMR_OUTPUT_DIR", "CMR_REPORT_FORMAT", "CMR_BUILD_RETRIES", "CMR_DEBUG"):
        monkeypatch.delenv(key, raising=False)
    path = tmp_path / "config-home"
    monkeypatch.setenv("CMR_CONFIG_DIR", str(path))
    return path
