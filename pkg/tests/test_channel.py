"""Tests for the tap profile, precoding and the Bob / Eve channel model."""

import math

import numpy as np
import pytest
from channel import (
    ChannelException,
    LinkConfig,
    NoiseScaling,
    TapProfile,
    artificial_noise,
    build_tap_matrix,
    eve_equalize,
    precode,
    random_tap_profile,
    transmit_bob,
    transmit_eve,
)
from fiber import FiberSpec, edge_power_fraction, solve_modes
from matrix import MatrixException, tikhonov_inverse
from util import make_rng
from utils import normal_equations_inverse


def unit(n: int, k: int) -> np.ndarray:
    x = np.zeros(n, dtype=complex)
    x[k] = 1.0
    return x


# ---------------------------
# Tap profile
# ---------------------------
def test_tap_anchors(basis55, tap55):
    assert len(tap55) == 55
    assert tap55.sigma_sq.min() == 0.0028
    assert tap55.sigma_sq.max() == 1.0
    assert not tap55.degenerate
    # LP01 keeps the least power at the core edge
    assert tap55.sigma_sq[0] == 0.0028
    # Both orientations of a mode share one factor
    assert tap55.sigma_sq[5] == tap55.sigma_sq[6]


def test_tap_preserves_edge_fraction_order(basis55, tap55):
    fractions = np.array([edge_power_fraction(m, basis55.fiber) for m in basis55.modes])
    ordered = tap55.sigma_sq[np.argsort(fractions, kind="stable")]
    assert np.all(np.diff(ordered) >= 0)


def test_tap_single_mode_is_degenerate():
    fiber = FiberSpec(core_radius=2.0 * 1e-6 / (2 * math.pi * 0.1), numerical_aperture=0.1, wavelength=1e-6)
    tap = build_tap_matrix(solve_modes(fiber))
    assert tap.degenerate
    assert np.array_equal(tap.sigma_sq, np.ones(1))


def test_tap_invalid(basis55):
    for bad in [0.0, 1.0, -0.1, 1.5]:
        with pytest.raises(ChannelException):
            build_tap_matrix(basis55, sigma_sq_min=bad)
    with pytest.raises(ChannelException):
        TapProfile(sigma_sq=np.array([0.0, 1.0]))
    with pytest.raises(ChannelException):
        TapProfile(sigma_sq=np.array([0.1, 0.5]))
    with pytest.raises(ChannelException):
        TapProfile(sigma_sq=np.array([]))


def test_random_tap_profiles():
    linear = random_tap_profile(10, "linear", 0.01, seed=4)
    assert np.allclose(np.sort(linear.sigma_sq), np.linspace(0.01, 1.0, 10))
    assert linear.sigma_sq.min() == 0.01 and linear.sigma_sq.max() == 1.0
    log = random_tap_profile(10, "log", 0.01, seed=4)
    assert np.allclose(np.sort(log.sigma_sq), np.geomspace(0.01, 1.0, 10))
    assert np.array_equal(log.sigma_sq, random_tap_profile(10, "log", 0.01, seed=4).sigma_sq)
    assert random_tap_profile(1, "linear").degenerate
    with pytest.raises(ChannelException):
        random_tap_profile(10, "edge")
    with pytest.raises(ValueError):
        random_tap_profile(10, "quadratic")


def test_tap_document(tap55):
    document = tap55.external()
    assert document["provenance"]["scheme"] == "edge"
    assert document["rho"] == 0.8
    assert len(document["sigma_sq"]) == 55


# ---------------------------
# Precoding and artificial noise
# ---------------------------
def test_precode_identity():
    x = unit(55, 3)
    assert np.allclose(precode(np.eye(55), x, 0.0, 0.0, seed=1), x / math.sqrt(55))
    # Normalization cancels the regularization scale
    assert np.allclose(precode(np.eye(55), x, 0.0, "paper-default", seed=1), x / math.sqrt(55))


def test_precode_reproduces_artificial_noise():
    x = unit(55, 0)
    expected = (x + artificial_noise(make_rng(9), 55, 0.5, 1.0, NoiseScaling.entry)) / math.sqrt(55)
    assert np.allclose(precode(np.eye(55), x, 0.5, 0.0, seed=9), expected)
    assert not np.allclose(precode(np.eye(55), x, 0.5, 0.0, seed=10), expected)


def test_precode_uses_given_inverse(haar55):
    x = unit(55, 7)
    t_inv = tikhonov_inverse(haar55)
    given = precode(haar55, x, 0.0, "paper-default", 1, t_inv=t_inv)
    assert np.allclose(given, precode(haar55, x, 0.0, "paper-default", 1))


def test_precode_invalid(haar55):
    with pytest.raises(ChannelException):
        precode(haar55, unit(55, 0), 1.5, "paper-default", 1)
    with pytest.raises(ChannelException):
        precode(haar55, unit(54, 0), 0.0, "paper-default", 1)


def test_artificial_noise_power():
    rng = np.random.default_rng(31)
    vector = np.array([artificial_noise(rng, 55, 0.5, 1.0, "vector") for _ in range(4000)])
    assert np.mean(np.sum(np.abs(vector) ** 2, axis=1)) == pytest.approx(0.25, rel=0.05)
    entry = np.array([artificial_noise(rng, 55, 0.5, 2.0, "entry") for _ in range(200)])
    assert np.mean(np.abs(entry) ** 2) == pytest.approx(1.0, rel=0.05)


# ---------------------------
# Bob and Eve
# ---------------------------
def test_bob_noise_power():
    rng = np.random.default_rng(32)
    samples = np.array([transmit_bob(np.eye(55), np.zeros(55), 0.1, rng) for _ in range(200)])
    assert np.mean(np.abs(samples) ** 2) == pytest.approx(2 * 0.1**2, rel=0.05)
    assert np.array_equal(transmit_bob(np.eye(3), np.ones(3), 0.0, 1), np.ones(3, dtype=complex))


def test_eve_without_tap_matches_bob(haar55):
    x = precode(haar55, unit(55, 2), 0.0, "paper-default", 1)
    eve = transmit_eve(haar55, TapProfile.identity(55), x, 0.1, 3)
    bob = transmit_bob(haar55, x, 0.1, 3)
    assert np.array_equal(eve, bob)


def test_eve_attenuation(haar55, tap55):
    y = transmit_eve(np.eye(55), tap55, unit(55, 0), 0.0, 1)
    assert abs(y[0]) == pytest.approx(math.sqrt(0.0028))
    x = make_rng(5).normal(size=55) + 0j
    expected = np.diag(np.sqrt(tap55.sigma_sq)) @ haar55 @ x
    assert np.allclose(transmit_eve(haar55, tap55, x, 0.0, 1), expected)
    with pytest.raises(ChannelException):
        transmit_eve(np.eye(54), tap55, np.zeros(54), 0.0, 1)


def test_eve_equalize_identity_link():
    link = LinkConfig(t_ab=np.eye(55), t_ae=np.eye(55), tap=TapProfile.identity(55), alpha_rule=0.0)
    y = make_rng(6).normal(size=55) + 1j
    assert np.allclose(eve_equalize(link, y), y)


def test_eve_equalize_undoes_tap(tap55):
    link = LinkConfig(t_ab=np.eye(55), t_ae=np.eye(55), tap=tap55, alpha_rule=0.0)
    x = unit(55, 0)
    x_precoded = precode(link.t_ab, x, 0.0, link.alpha_rule, 1)
    y = transmit_eve(link.t_ae, link.tap, x_precoded, 0.0, 1)
    assert np.allclose(eve_equalize(link, y), x / math.sqrt(55))


def test_eve_inverse_amplifies_noise(default_link):
    assert np.linalg.norm(default_link.h_inv, 2) > np.linalg.norm(default_link.t_ab_inv, 2)


def test_eve_inverse_matches_normal_equations(default_link):
    h = default_link.h
    expected = normal_equations_inverse(h, 0.12 * np.linalg.norm(h, 2))
    assert np.linalg.norm(default_link.h_inv - expected) / np.linalg.norm(expected) < 1e-8


def test_eve_gain_follows_tap(default_link, tap55):
    """With T_AE = T_AB, Eve's equalized chain is diagonal with gain sigma^2 / (sigma^2 + 0.12^2)"""
    chain = default_link.h_inv @ default_link.h
    gains = tap55.sigma_sq / (tap55.sigma_sq + 0.0144)
    assert np.allclose(chain, np.diag(gains), atol=1e-10)
    assert gains[0] == pytest.approx(0.163, abs=1e-3)


# ---------------------------
# Link configuration
# ---------------------------
def test_link_config(default_link, haar55):
    assert default_link.n == 55
    assert default_link.signal_scale == pytest.approx(1.0144 / math.sqrt(55))
    assert default_link.noise_std == pytest.approx(0.05 * default_link.signal_scale)
    assert default_link.noise_scaling == NoiseScaling.entry
    link = LinkConfig(t_ab=haar55, t_ae=haar55, tap=TapProfile.identity(55), noise_scaling="vector")
    assert link.noise_scaling == NoiseScaling.vector
    assert default_link.external()["alpha_rule"] == "paper-default"


def test_link_config_invalid(haar55, tap55):
    with pytest.raises(ChannelException):
        LinkConfig(t_ab=haar55, t_ae=np.eye(54), tap=tap55)
    with pytest.raises(ChannelException):
        LinkConfig(t_ab=np.eye(54), t_ae=np.eye(54), tap=tap55)
    with pytest.raises(ChannelException):
        LinkConfig(t_ab=haar55, t_ae=haar55, tap=tap55, receiver_noise_std=-0.1)
    with pytest.raises(ChannelException):
        LinkConfig(t_ab=haar55, t_ae=haar55, tap=tap55, artificial_noise_level=1.5)
    with pytest.raises(MatrixException):
        LinkConfig(t_ab=haar55, t_ae=haar55, tap=tap55, alpha_rule="bogus")
