import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from phonon_hom.config import ConfigError, parse_config, serialize_config
from phonon_hom.lambda_model import Mode

FULL = """
# everything
[model]
mode = raman
h = 0.5
omega = 0.5
nu = 6
gamma = 0.05   ; inline comment
alpha = 0.0027
omega_c = 2.2
temperature = 298

[sweep]
parameter = nu
min = 0.1
max = 20
points = 5
spacing = log

[integrator]
rel_tol = 1e-8
abs_tol = 1e-10
t_max = 1e6
termination = 1e-4

[oracle]
enabled = yes
trajectories = 1000
seed = 3

[output]
directory = out
prefix = fig4

[rates]
targets = 0.99, 0.999
modes = raman, pulse-relax
gammas = 0, 0.05
"""


def test_parse_full():
    cfg = parse_config(FULL, env={})
    assert cfg.model.mode is Mode.RAMAN and cfg.model.nu == 6.0
    assert cfg.params().kappa == pytest.approx(1.5)
    assert cfg.sweep.grid()[0] == pytest.approx(0.1) and cfg.sweep.grid()[-1] == pytest.approx(20)
    assert len(cfg.sweep_spec().values) == 5
    assert cfg.oracle.enabled and cfg.oracle.trajectories == 1000
    assert cfg.rates.targets == (0.99, 0.999)
    assert cfg.rates.modes == (Mode.RAMAN, Mode.PULSE_RELAX)
    assert cfg.control().t_max == 1e6


def test_defaults_and_empty_sweep():
    cfg = parse_config("", env={})
    assert cfg.sweep is None and cfg.sweep_spec() is None and cfg.rates is None
    assert cfg.params().kappa == pytest.approx(3 * cfg.model.h)


def test_pulse_relax_forces_zero_drive():
    cfg = parse_config("[model]\nmode = pulse-relax\nomega = 0.4\nnu = 5\n", env={})
    p = cfg.params()
    assert p.omega == 0 and p.nu == 0


def test_explicit_kappa_pins_sweep():
    cfg = parse_config("[model]\nkappa = 2\n[sweep]\nparameter = h\nmin = 0.1\nmax = 1\npoints = 3\n", env={})
    assert {p.kappa for p in cfg.sweep_spec().points()} == {2.0}


@pytest.mark.parametrize(
    "text, line, fragment",
    [
        ("[model]\nfoo = 1\n", 2, "unknown key"),
        ("[model]\nh = 1\n[plots]\n", 3, "unknown section"),
        ("h = 1\n", 1, "outside of any section"),
        ("[model]\nh\n", 2, "key = value"),
        ("[model]\nh = abc\n", 2, "bad value"),
        ("[model]\nmode = cw\n", 2, "bad value"),
        ("[model]\nh = 1\nh = 2\n", 3, "duplicate key"),
        ("[model]\n[model]\n", 2, "duplicate section"),
        ("\n[model]\nh = -1\n", 2, "h must be > 0"),
        ("[sweep]\nparameter = gamma\n", 1, "sweep parameter"),
        ("[sweep]\nparameter = h\nmin = 2\nmax = 1\n", 1, "max > min"),
        ("[sweep]\nspacing = log\nmin = 0\n", 1, "log spacing"),
        ("[rates]\ntargets = 1.5\n", 1, "(0, 1)"),
        ("[oracle]\nenabled = maybe\n", 2, "bad value"),
        ("[model\n", 1, "malformed"),
    ],
)
def test_errors_reference_lines(text, line, fragment):
    with pytest.raises(ConfigError) as info:
        parse_config(text, env={}, source="x.ini")
    assert info.value.line == line
    assert f"x.ini:{line}:" in str(info.value)
    assert fragment in str(info.value)


def test_env_overrides():
    cfg = parse_config("[model]\nh = 0.5\n", env={"SIM_MODEL_H": "0.3", "SIM_ORACLE_SEED": "9", "SIM_SWEEP_POINTS": "2"})
    assert cfg.model.h == 0.3 and cfg.params().kappa == pytest.approx(0.9)
    assert cfg.oracle.seed == 9
    assert cfg.sweep.points == 2
    with pytest.raises(ConfigError, match="SIM_MODEL_NU"):
        parse_config("", env={"SIM_MODEL_NU": "fast"})


def test_round_trip_idempotent():
    cfg = parse_config(FULL, env={})
    text = serialize_config(cfg)
    again = parse_config(text, env={})
    assert again == cfg
    assert serialize_config(again) == text


@settings(max_examples=50, deadline=None)
@given(
    h=st.floats(0.01, 10),
    nu=st.floats(0, 30),
    gamma=st.floats(0, 1),
    mode=st.sampled_from(["raman", "pulse-relax"]),
    seed=st.integers(0, 2**31),
)
def test_round_trip_property(h, nu, gamma, mode, seed):
    text = f"[model]\nmode = {mode}\nh = {h!r}\nnu = {nu!r}\ngamma = {gamma!r}\n[oracle]\nseed = {seed}\n"
    cfg = parse_config(text, env={})
    assert parse_config(serialize_config(cfg), env={}) == cfg
