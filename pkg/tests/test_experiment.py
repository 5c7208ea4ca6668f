"""Tests for configuration validation and the builders turning a configuration into a link."""

import configparser

import numpy as np
import pytest
from channel import TapScheme
from experiment import (
    ConfigException,
    ExperimentConfig,
    build_link,
    build_matrices,
    build_tap,
    one_based_channels,
)
from matrix import haar_unitary, store_matrix


def parse(text: str) -> configparser.ConfigParser:
    parser = configparser.ConfigParser()
    parser.optionxform = str
    parser.read_string(text)
    return parser


def rejected(text: str) -> str:
    """ConfigException message for an invalid INI"""
    with pytest.raises(ConfigException) as e:
        ExperimentConfig.from_config(parse(text))
    return e.value.value


def test_defaults():
    cfg = ExperimentConfig.from_config(parse(""))
    assert cfg.fiber.core_radius == 12.5e-6
    assert cfg.sweep.noise_levels == [0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0]
    assert cfg.link.alpha_rule == "paper-default"
    assert cfg.link.noise_scaling == "entry"
    assert cfg.secure.eve_fail_min == 0.99
    assert cfg.mdm.active_channels() == [1, 6, 50]


def test_values_from_ini():
    cfg = ExperimentConfig.from_config(
        parse(
            "[sweep]\nnoise_levels = 0; 0.25, 0.5\ntrials = 20\nsvg = no\n"
            "[mdm]\nchannels = 1, 6, 50\nbits = 101\n"
            "[link]\nalpha_rule = relative:0.2\nnoise_scaling = vector\n"
        )
    )
    assert cfg.sweep.noise_levels == [0.0, 0.25, 0.5]
    assert cfg.sweep.trials == 20
    assert cfg.sweep.svg is False
    assert cfg.mdm.active_channels() == [1, 50]
    assert cfg.link.alpha_rule == "relative:0.2"


def test_overrides():
    cfg = ExperimentConfig.from_config(
        parse("[sweep]\ntrials = 20\n"), {("sweep", "trials"): 7, ("sweep", "seed"): None, ("output", "dir"): "x"}
    )
    assert cfg.sweep.trials == 7
    assert cfg.sweep.seed == 1
    assert cfg.output.dir == "x"


def test_invalid_values_name_the_option(tmp_path):
    assert "fiber.numerical_aperture" in rejected("[fiber]\nnumerical_aperture = -1\n")
    assert "fiber" in rejected("[fiber]\nnumerical_aperture = 1.5\n")
    assert "sweep.noise_levels" in rejected("[sweep]\nnoise_levels = 0.5, 0.2\n")
    assert "sweep.noise_levels" in rejected("[sweep]\nnoise_levels = 0, 1.5\n")
    assert "sweep.trials" in rejected("[sweep]\ntrials = 0\n")
    assert "link.alpha_rule" in rejected("[link]\nalpha_rule = bogus\n")
    assert "analysis.rng" in rejected("[analysis]\nrng = MT19937\n")
    assert "matrix" in rejected("[matrix]\nsource = file\n")
    assert "matrix.path" in rejected(f"[matrix]\nsource = file\npath = {tmp_path / 'absent.json'}\n")
    assert "mdm.channels" in rejected("[mdm]\nchannels = 1, 6, 1\n")
    assert "mdm" in rejected("[mdm]\nchannels = 1, 6\nbits = 101\n")
    assert "mdm" in rejected("[mdm]\nchannels = 1, 6\nbits = 00\n")


def test_ini_roundtrip(tmp_path):
    cfg = ExperimentConfig.from_config(parse("[sweep]\nnoise_levels = 0, 0.3\nseed = 12\n[tap]\nscheme = log\n"))
    path = str(tmp_path / "experiment.ini")
    cfg.to_ini(path)
    parser = configparser.ConfigParser()
    parser.read(path)
    assert ExperimentConfig.from_config(parser) == cfg


def test_build_tap(basis55):
    assert build_tap(ExperimentConfig.from_config(parse("[tap]\nscheme = none\n")), basis55).degenerate
    tap = build_tap(ExperimentConfig.from_config(parse("[tap]\nscheme = linear\nseed = 5\n")), basis55)
    assert tap.provenance["scheme"] == str(TapScheme.linear)
    assert tap.sigma_sq.min() == 0.0028
    edge = build_tap(ExperimentConfig.from_config(parse("")), basis55)
    assert edge.sigma_sq[0] == 0.0028


def test_build_matrices(tmp_path):
    cfg = ExperimentConfig.from_config(parse("[matrix]\nseed = 4\n"))
    t_ab, t_ae, independent = build_matrices(cfg, 55)
    assert not independent and t_ae is t_ab
    assert np.array_equal(t_ab, haar_unitary(55, 4))

    cfg = ExperimentConfig.from_config(parse("[matrix]\neve_source = haar\neve_seed = 9\n"))
    t_ab, t_ae, independent = build_matrices(cfg, 55)
    assert independent and np.array_equal(t_ae, haar_unitary(55, 9))

    coupled = ExperimentConfig.from_config(parse("[matrix]\nsource = coupled\nepsilon = 0\n"))
    assert np.array_equal(build_matrices(coupled, 55)[0], np.eye(55))

    path = tmp_path / "tm.json"
    store_matrix(haar_unitary(8, 1), str(path))
    from_file = ExperimentConfig.from_config(parse(f"[matrix]\nsource = file\npath = {path}\n"))
    assert np.array_equal(build_matrices(from_file, 8)[0], haar_unitary(8, 1))
    with pytest.raises(ConfigException):
        build_matrices(from_file, 55)


def test_build_link(basis55):
    cfg = ExperimentConfig.from_config(parse("[link]\nreceiver_noise_std = 0.02\nnoise_scaling = vector\n"))
    link = build_link(cfg, basis55)
    assert link.n == 55
    assert link.receiver_noise_std == 0.02
    assert link.noise_scaling == "vector"
    assert link.artificial_noise_level == 0.0


def test_one_based_channels():
    assert one_based_channels([1, 6, 55], 55) == [0, 5, 54]
    with pytest.raises(ConfigException):
        one_based_channels([0, 6], 55)
    with pytest.raises(ConfigException):
        one_based_channels([56], 55)
