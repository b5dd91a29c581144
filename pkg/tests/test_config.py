import pytest

from blowupflow.config import ConfigError, load_config, parse_config


def test_parse_grammar():
    cfg = parse_config("""
        # model
        n = 3
        sigma = 1.0   # trailing comment
        x0_grid = 5, 10 20
        coeff = 1 1 0.5 -0.25
        coeff = 1 1 0.5 0.25
        coeff = 0 0 2 0
    """)
    assert cfg.get("n") == 3 and cfg.get("sigma") == 1.0
    assert cfg.get("x0_grid") == [5.0, 10.0, 20.0]
    assert cfg.coeffs == {(1, 1): 1 + 0j, (0, 0): 2 + 0j}
    model = cfg.model()
    assert model.n == 3 and model.f_coeffs[(1, 1)] == 1
    assert "sigma" in cfg and "alpha" not in cfg
    assert cfg.get("alpha", 0.1) == 0.1


@pytest.mark.parametrize("text", [
    "n 3",
    "nn = 3",
    "n = three",
    "coeff = 1 1 0.5",
    "coeff = a 1 0 0",
])
def test_parse_errors(text):
    with pytest.raises(ConfigError):
        parse_config(text)


def test_model_requires_n():
    with pytest.raises(ConfigError):
        parse_config("sigma = 1").model()


def test_load_missing(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "nope.cfg")
