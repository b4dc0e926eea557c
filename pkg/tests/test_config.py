import numpy as np
import pytest

from uavmec.config import ConfigError, ScenarioConfig, default_config, load_config


def write(tmp_path, text):
    p = tmp_path / "scenario.cfg"
    p.write_text(text)
    return p


def test_empty_file_gives_defaults(tmp_path):
    cfg = load_config(write(tmp_path, ""))
    assert cfg.V == 50.0
    assert cfg.W == 1e6
    assert cfg.h == 100.0
    assert cfg.N == 200
    assert cfg.E_u == 170.0


def test_comments_and_blank_lines(tmp_path):
    cfg = load_config(write(tmp_path, "# a comment\n\nV = 25  # trailing\n"))
    assert cfg.V == 25.0


def test_zero_slot_length_names_key(tmp_path):
    with pytest.raises(ConfigError) as exc:
        load_config(write(tmp_path, "delta = 0\n"))
    assert exc.value.key == "delta"


def test_seed_override_keeps_everything_else(tmp_path):
    cfg = load_config(write(tmp_path, "seed = 7\n"))
    ref = default_config()
    assert cfg.seed == 7
    for name in ("V", "W", "N", "E_u", "alpha", "kappa"):
        assert getattr(cfg, name) == getattr(ref, name)
    assert np.array_equal(cfg.ue_init, ref.ue_init)


def test_unknown_key_rejected(tmp_path):
    with pytest.raises(ConfigError) as exc:
        load_config(write(tmp_path, "banana = 3\n"))
    assert exc.value.key == "banana"


def test_duplicate_key_rejected(tmp_path):
    with pytest.raises(ConfigError):
        load_config(write(tmp_path, "V = 1\nV = 2\n"))


def test_vectors_and_per_user_lists(tmp_path):
    cfg = load_config(write(tmp_path, (
        "K = 2\n"
        "p_I = 10 20\n"
        "ue_init = 0 0; 50 60\n"
        "rho_k = 0.5, 0.25\n"
        "P_k = 0.2\n"
    )))
    assert np.allclose(cfg.p_I, [10, 20])
    assert cfg.ue_init.shape == (2, 2)
    assert np.allclose(cfg.rho_k, [0.5, 0.25])
    assert np.allclose(cfg.P_k, [0.2, 0.2])  # scalar broadcast


def test_kappa_out_of_range():
    with pytest.raises(ConfigError) as exc:
        default_config(kappa=0.0)
    assert exc.value.key == "kappa"
    with pytest.raises(ConfigError):
        default_config(kappa=1.5)


def test_alpha_and_rho_ranges():
    with pytest.raises(ConfigError):
        default_config(alpha=1.2)
    with pytest.raises(ConfigError):
        default_config(rho_k=np.array([0.5, 0.5, 0.5, 1.5]))


def test_unreachable_destination_rejected():
    with pytest.raises(ConfigError) as exc:
        default_config(N=10)  # 600 m in 10 slots at 25 m/s is impossible
    assert exc.value.key == "p_F"


def test_wrong_per_user_length():
    with pytest.raises(ConfigError) as exc:
        default_config(rho_k=np.array([0.1, 0.2]))
    assert exc.value.key == "rho_k"


def test_replace_roundtrip():
    cfg = default_config()
    cfg2 = cfg.replace(seed=99)
    assert cfg2.seed == 99 and cfg.seed == 0
