import pytest

from cfisac.config import (FIELD_NAMES, ConfigError, SystemConfig, dump_config, dumps, load_config, loads,
                           paper_scale, parse_value)


def test_round_trip(tmp_path):
    path = tmp_path / "default.ini"
    dump_config(SystemConfig(), path)
    first = load_config(path)
    dump_config(first, path)
    assert load_config(path) == first == SystemConfig()


def test_round_trip_nondefault():
    cfg = SystemConfig(p_t=0.123456789, epsilon=0.17, robust=False, seed=42)
    assert loads(dumps(cfg)) == cfg


def test_infeasible_layout_named():
    text = dumps(SystemConfig()).replace("N_T = 4", "N_T = 16")
    with pytest.raises(ConfigError, match="InfeasibleLayout"):
        loads(text)


def test_missing_field_named():
    text = "\n".join(line for line in dumps(SystemConfig()).splitlines() if not line.startswith("gamma_b"))
    with pytest.raises(ConfigError, match="gamma_b"):
        loads(text, strict=True)
    assert loads(text).gamma_b == SystemConfig().gamma_b


def test_unknown_field_rejected():
    with pytest.raises(ConfigError, match="bogus"):
        loads("[radio]\nbogus = 1\n")


def test_bad_value_reports_field():
    with pytest.raises(ConfigError, match="N_T"):
        loads("[network]\nN_T = four\n")


def test_parse_error_has_line():
    with pytest.raises(ConfigError, match="line"):
        loads("[network]\nN_T\n= = =\n[broken", source="cfg.ini")


@pytest.mark.parametrize("changes", [dict(n_tap=0), dict(p_t=-1.0), dict(gamma_b=0.0), dict(n_ue=0)])
def test_invariants(changes):
    with pytest.raises(ValueError):
        SystemConfig(**changes)


def test_digest_tracks_content():
    assert SystemConfig().digest() == SystemConfig().digest()
    assert SystemConfig().digest() != SystemConfig(seed=1).digest()


def test_paper_scale_preset():
    cfg = paper_scale()
    assert (cfg.n_t, cfg.n_r) == (16, 4)
    assert loads(dumps(cfg)) == cfg


def test_parse_value():
    assert parse_value("N_T", "8") == ("n_t", 8)
    assert parse_value("epsilon", "0.2") == ("epsilon", 0.2)
    assert parse_value("robust", "no") == ("robust", False)
    with pytest.raises(ConfigError):
        parse_value("nope", "1")
    assert len(FIELD_NAMES) == len(set(FIELD_NAMES))
