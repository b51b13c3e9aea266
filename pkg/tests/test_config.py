from __future__ import annotations

import pytest

from cavityspec.config import (
    ConfigSyntaxError,
    ConstraintViolation,
    TypeMismatch,
    UnknownKey,
    load_config,
    parse_config,
)


def test_minimal_defaults():
    cfg = parse_config("g0 = 8.0\nkappa = 1.6\ngamma = 0.32\n")
    assert cfg.params.gamma_p == 0.0 and cfg.params.delta == 0.0
    assert cfg.backend == "regression"
    assert cfg.workers == 1
    assert cfg.ensemble.n_traj == 20000 and cfg.ensemble.batch_count == 50
    assert cfg.grid.n_omega == 2048 and cfg.grid.dt is None
    assert cfg.mech is None and not cfg.emit_svg


def test_integers_accepted_for_rates():
    cfg = parse_config("g0 = 8\nkappa = 2\ngamma = 1\n")
    assert isinstance(cfg.params.g0, float)


def test_closed_form_rejects_dephasing():
    with pytest.raises(ConstraintViolation) as exc:
        parse_config('g0 = 8\nkappa = 1.6\ngamma = 0.32\ngamma_p = 5\nbackend = "closed_form"\n')
    assert exc.value.key == "backend" and exc.value.line == 5


def test_fig4_config_is_valid():
    cfg = parse_config("g0 = 38\nkappa = 43\ngamma = 0.1\ngamma_p = 20\n")
    assert (cfg.params.g0, cfg.params.kappa, cfg.params.gamma, cfg.params.gamma_p) == (38, 43, 0.1, 20)


def test_unknown_key_reports_line():
    with pytest.raises(UnknownKey) as exc:
        parse_config("g0 = 8\nkappa = 1.6\ngamma = 0.32\n\n[grid]\ndt = 0.01\nspacing = 3\n")
    assert exc.value.key == "grid.spacing"
    assert exc.value.line == 7
    assert "line 7" in str(exc.value)


def test_unknown_table():
    with pytest.raises(UnknownKey) as exc:
        parse_config("g0 = 8\nkappa = 1.6\ngamma = 0.32\n[plot]\nx = 1\n")
    assert exc.value.key == "plot" and exc.value.line == 4


def test_type_mismatch():
    with pytest.raises(TypeMismatch) as exc:
        parse_config('g0 = "eight"\nkappa = 1.6\ngamma = 0.32\n')
    assert exc.value.key == "g0" and exc.value.line == 1
    with pytest.raises(TypeMismatch):
        parse_config("g0 = 8\nkappa = 1.6\ngamma = 0.32\n[ensemble]\nn_traj = 10.5\n")
    with pytest.raises(TypeMismatch):
        parse_config("g0 = true\nkappa = 1.6\ngamma = 0.32\n")


@pytest.mark.parametrize(
    "text, key",
    [
        ("g0 = -1\nkappa = 1.6\ngamma = 0.32\n", "g0"),
        ("g0 = 8\nkappa = 0\ngamma = 0\n", "kappa"),
        ("g0 = 8\nkappa = 1.6\n", "gamma"),
        ('g0 = 8\nkappa = 1.6\ngamma = 0.32\nbackend = "qutip"\n', "backend"),
        ("g0 = 8\nkappa = 1.6\ngamma = 0.32\n[ensemble]\nn_traj = 100\nbatch_count = 7\n", "ensemble.batch_count"),
        ("g0 = 8\nkappa = 1.6\ngamma = 0.32\n[grid]\ndt = 0\n", "grid.dt"),
        ("g0 = 8\nkappa = 1.6\ngamma = 0.32\n[grid]\nomega_min = 1\n", "grid.omega_max"),
        ("g0 = 8\nkappa = 1.6\ngamma = 0.32\n[output]\nmix = 2\n", "output.mix"),
        ("[mech]\nk_c = 2\ng_c = 2\nkappa_c = 0.2\n", "mech.drive_freq"),
    ],
)
def test_constraint_violations(text, key):
    with pytest.raises(ConstraintViolation) as exc:
        parse_config(text, require_system="[mech]" not in text)
    assert exc.value.key == key


def test_syntax_error_has_line():
    with pytest.raises(ConfigSyntaxError) as exc:
        parse_config("g0 = 8\nkappa = = 1.6\n")
    assert exc.value.line == 2


def test_mech_only_config(tmp_path):
    path = tmp_path / "mech.toml"
    path.write_text("[mech]\nk_c = 2\ng_c = 2\nkappa_c = 0.2\ndrive_freq = 4\njump_rate = 1\nseed = 5\n")
    cfg = load_config(path, require_system=False)
    assert cfg.params is None
    assert cfg.mech.params.jump_rate == 1.0 and cfg.mech.seed == 5 and cfg.mech.t_max == 1000.0


def test_full_config_round_trip():
    text = """
g0 = 8.0
kappa = 1.6
gamma = 0.32
gamma_p = 5.0
delta = 24.0
backend = "monte_carlo"
workers = 2

[grid]
n_omega = 512
omega_min = -60.0
omega_max = 80.0

[ensemble]
n_traj = 2000
seed = 7
batch_count = 20

[output]
dir = "out"
stem = "run1"
svg = true
mix = 0.25
"""
    cfg = parse_config(text)
    assert cfg.backend == "monte_carlo" and cfg.workers == 2
    assert cfg.grid.omega_min == -60.0 and cfg.grid.n_omega == 512
    assert cfg.ensemble.master_seed == 7 and cfg.ensemble.batch_size == 100
    assert cfg.output_dir == "out" and cfg.stem == "run1" and cfg.emit_svg and cfg.mix == 0.25
