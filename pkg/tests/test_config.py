import pytest

from lockesim.config import MIN_TOKENS, SimConfig, load_config
from lockesim.core.errors import ConfigError
from lockesim.core.protocol import TableMode
from lockesim.data.load_data import default_config_text


def test_tokens_default_to_one_per_l1():
    assert SimConfig(n_l1=4).tokens == 4
    assert SimConfig(n_l1=1).tokens == MIN_TOKENS
    assert SimConfig(n_l1=3, tokens=7).tokens == 7


def test_changing_n_l1_recomputes_default_tokens():
    base = SimConfig(n_l1=2)
    assert base.with_overrides(n_l1=6).tokens == 6
    assert base.with_overrides(n_l1=6, tokens=9).tokens == 9
    assert base.with_overrides(seed=None, policy=None) == base


def test_from_text():
    cfg = SimConfig.from_text("""
    # comment
    n_l1 = 3
    tokens=5      # trailing comment
    mode=STRICT
    policy=fifo
    reissue_on_quiescence=no
    reissue_timeout=0
    fold_requests=false
    """)
    assert cfg.n_l1 == 3
    assert cfg.tokens == 5
    assert cfg.mode is TableMode.STRICT
    assert cfg.policy == "fifo"
    assert cfg.reissue_on_quiescence is False
    assert cfg.reissue_timeout == 0
    assert cfg.fold_requests is False


@pytest.mark.parametrize("text, message", [
    ("n_l1", "expected key=value at line 1"),
    ("colour=blue", "unknown key 'colour' at line 1"),
    ("\nn_l1=two", "bad value 'two' for n_l1 at line 2"),
    ("mode=loose", "bad value 'loose' for mode"),
    ("reissue_on_quiescence=maybe", "bad value"),
    ("tokens=1", "tokens must be at least 2"),
    ("n_l1=0", "n_l1 must be at least 1"),
    ("policy=lifo", "unknown policy 'lifo'"),
    ("l2_ways=0", "l2_ways must be positive"),
    ("backoff_delay=-1", "backoff_delay must not be negative"),
    ("reissue_timeout=-5", "reissue_timeout must not be negative"),
    ("fold_requests=often", "bad value 'often' for fold_requests"),
])
def test_bad_config_text(text, message):
    with pytest.raises(ConfigError) as err:
        SimConfig.from_text(text)
    assert message in str(err.value)


def test_text_form_reads_back():
    cfg = SimConfig(n_l1=3, tokens=6, mode=TableMode.STRICT, policy="adversarial", seed=4,
                    reissue_on_quiescence=False)
    assert SimConfig.from_text(cfg.to_text()) == cfg


def test_packaged_defaults_match_the_built_in_ones():
    assert SimConfig.from_text(default_config_text()) == SimConfig()


def test_load_config_layers_file_then_overrides(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text("n_l1=3\nseed=5\n")
    cfg = load_config(path, seed=9, mode=TableMode.STRICT)
    assert cfg.n_l1 == 3
    assert cfg.seed == 9
    assert cfg.mode is TableMode.STRICT
    assert load_config() == SimConfig()


def test_missing_config_file(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "nope.cfg")
