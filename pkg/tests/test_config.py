import pytest

from heisobstacle.config import (KEYS, ConfigError, RunConfig, dump, key_table, parse_config,
                                 parse_text, parse_value)


def test_defaults():
    cfg = parse_text("")
    assert cfg == RunConfig()
    assert cfg.tol == 1e-8 and cfg.resolution == (33, 33, 33)
    assert cfg.psi == "valley" and cfg.psi_params == (0.5, 2.0)


def test_round_trip():
    cfg = parse_text("p = 1.5\neps_list = 0.5, 0.05, 0.005, 5e-4\nls_tol = 1e-5\nresolution = 17\n"
                     "negative_control = yes\n")
    assert cfg.resolution == (17, 17, 17) and cfg.negative_control
    assert parse_text(dump(cfg)) == cfg


def test_comments_and_overrides(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text("# comment\np = 3  # trailing\nseed = 4\n")
    cfg = parse_config(path, {"seed": 9})
    assert cfg.p == 3.0 and cfg.seed == 9


@pytest.mark.parametrize("text, key", [
    ("p = 0.5", "p"),
    ("eps_list = 0.1, 0.2, 0.01", "eps_list"),
    ("bogus = 1", "bogus"),
    ("p = abc", "p"),
    ("psi = hill", "psi"),
    ("psi_params = 1", "psi_params"),
    ("eta_list = 1.5", "eta_list"),
    ("resolution = 2", "resolution"),
    ("box_upper = -2, 1, 1", "box_upper"),
    ("step_policy = newton", "step_policy"),
    ("p = 2\np = 3", "p"),
])
def test_errors_name_the_key(text, key):
    with pytest.raises(ConfigError, match=f"^{key}:"):
        parse_text(text)


def test_unknown_override():
    with pytest.raises(ConfigError, match="nope"):
        parse_text("", {"nope": 1})


def test_missing_file(tmp_path):
    with pytest.raises(ConfigError, match="cannot read"):
        parse_config(tmp_path / "absent.cfg")


def test_malformed_line():
    with pytest.raises(ConfigError, match="line 1"):
        parse_text("just words")


def test_parse_value_kinds():
    assert parse_value("ls_tol", "auto") is None
    assert parse_value("negative_control", "off") is False
    assert parse_value("consistency_resolutions", "9, 17") == (9, 17)


def test_key_table_lists_every_key():
    table = key_table()
    for name in KEYS:
        assert f"`{name}`" in table
