import pytest

from bubblestrip.config import DEFAULTS, load_config, parse_config_text
from bubblestrip.errors import ConfigError


def test_defaults_validate():
    cfg = load_config()
    assert cfg.dim.N == 5 and cfg.dim.k == 1
    assert cfg.grid == (2, 3, 4)
    assert cfg.profile(1).beta == (3.5,) * 5
    assert set(cfg.values) == set(DEFAULTS)


def test_parse_lists_comments_and_literals():
    text = """
    # comment line
    period.grid = 2, 3   # trailing comment
    profile1.a = -1.2, -1, -1, -1, -1
    reduction.convention = linear
    residual.mu_max = 1e3
    cloud.refine = False
    """
    vals = parse_config_text(text)
    assert vals["period.grid"] == (2, 3)
    assert vals["profile1.a"] == (-1.2, -1, -1, -1, -1)
    assert vals["reduction.convention"] == "linear"
    assert vals["residual.mu_max"] == 1000.0
    assert vals["cloud.refine"] is False


@pytest.mark.parametrize("text,match", [
    ("dimension.k = 3", "2k < N-2"),
    ("dimension.N = 6\ndimension.k = 2", "2k < N-2"),
    ("bogus.key = 1", "unknown key"),
    ("period.L = 2\nperiod.L = 3", "duplicate"),
    ("period.L", "expected"),
    ("reduction.convention = other", "convention"),
    ("period.grid = 2, 2.5", "integers"),
    ("norm.vartheta = 0.7", "vartheta"),
    ("profile1.a = 1.0", "negative"),
    ("residual.mu_min = 300", "mu_min"),
])
def test_validation_errors(text, match):
    with pytest.raises(ConfigError, match=match):
        load_config(text=text)


def test_scalar_profile_is_broadcast():
    cfg = load_config(text="profile2.beta = 3.2\nprofile2.a = -0.5")
    assert cfg.profile(2).beta == (3.2,) * 5
    assert cfg.profile(2).a == (-0.5,) * 5


def test_overrides():
    cfg = load_config().with_overrides(**{"quadrature.seed": 7, "green.tol": None})
    assert cfg["quadrature.seed"] == 7
    assert cfg["green.tol"] == DEFAULTS["green.tol"]


def test_missing_file():
    with pytest.raises(ConfigError, match="cannot read"):
        load_config("/nonexistent/run.cfg")
