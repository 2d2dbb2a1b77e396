import pytest

from cellbalance.config import DESK_SCALE, SimConfig, dump_config, load_config, parse_config


def test_defaults_valid():
    cfg = SimConfig()
    assert cfg.ttis_per_epoch == 60_000 and cfg.epoch_seconds == 60.0
    assert cfg.bs_positions == ((500.0, 375.0), (1500.0, 375.0), (500.0, 1125.0), (1500.0, 1125.0))


def test_parse_overrides_and_comments():
    cfg = parse_config("# desk run\nnum_ue = 50\nrb_per_bs = 100  # wide\ninterference = true\n")
    assert (cfg.num_ue, cfg.rb_per_bs, cfg.interference) == (50, 100, True)


def test_unknown_key_names_line():
    with pytest.raises(ValueError, match="line 2.*bogus"):
        parse_config("num_ue = 3\nbogus = 1\n")


def test_bad_value_names_line():
    with pytest.raises(ValueError, match="line 1"):
        parse_config("num_ue = many\n")


def test_bs_positions_set_count():
    cfg = parse_config("bs_positions = 100, 100; 1900, 1400\n")
    assert cfg.num_bs == 2 and cfg.bs_positions == ((100.0, 100.0), (1900.0, 1400.0))


def test_round_trip(tmp_path):
    cfg = SimConfig(num_ue=37, max_attachment=12, commute_speed=2.5, **DESK_SCALE)
    path = tmp_path / "sim.cfg"
    path.write_text(dump_config(cfg))
    assert load_config(path) == cfg


@pytest.mark.parametrize("change", [
    {"rb_per_bs": 75},
    {"num_ue": 0},
    {"bs_positions": ((0.0, 0.0),)},
    {"h_ut": 22.5},
    {"reward_mode": "bonus"},
])
def test_invalid(change):
    with pytest.raises(ValueError):
        SimConfig(**change)
