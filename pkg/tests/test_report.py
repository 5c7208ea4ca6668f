"""Tests for console tables, JSON documents and SVG heatmaps."""

import json

import numpy as np
from report import (
    draw_basis,
    draw_line_scan,
    draw_mdm,
    draw_secure,
    export_basis,
    write_heatmap,
    write_heatmaps,
)
from security import FAILED, MdmMessage, MdmSummary, SweepReport


def small_report() -> SweepReport:
    return SweepReport(
        channels=[0, 1, 2],
        noise_levels=[0.0, 0.5],
        bob_snr=np.array([[23.0, 20.0], [22.5, 19.0], [23.1, 18.2]]),
        eve_snr=np.array([[FAILED, FAILED], [9.5, FAILED], [21.0, 12.0]]),
        bob_success_rate=np.ones((3, 2)),
        eve_success_rate=np.array([[0.1, 0.0], [0.7, 0.2], [1.0, 0.9]]),
        trials_per_cell=10,
        seed=1,
    )


def test_draw_basis(basis55):
    text = draw_basis(basis55)
    lines = text.splitlines()
    assert "55 modes" in lines[0]
    assert len(lines) == 2 + 55
    assert lines[2].split()[:2] == ["1", "LP01"]


def test_draw_line_scan():
    lines = draw_line_scan(small_report(), 0.5).splitlines()
    assert len(lines) == 2 + 3
    assert lines[2].split() == ["1", "20.000", "1.000", "-inf", "0.000"]


def test_draw_secure():
    document = {"noise_level": 0.5, "eve_fail_min": 0.99, "bob_success_min": 0.99, "secure_channels": [1, 7]}
    assert draw_secure(document).strip().endswith("1, 7")
    document["secure_channels"] = []
    assert draw_secure(document).strip().endswith("none")


def test_draw_mdm():
    summary = MdmSummary(
        message=MdmMessage(active_channels=(0, 5), n=55),
        noise_levels=[0.0, 0.5],
        bob_success_rate=[1.0, 1.0],
        eve_success_rate=[0.4, 0.0],
        bob_snr=[23.0, 19.0],
        eve_snr=[FAILED, FAILED],
        trials=10,
        seed=1,
        eve_success_max=0.05,
        bob_success_min=0.95,
        protecting_noise_level=0.5,
    )
    text = draw_mdm(summary)
    assert "channels 1;6" in text
    assert text.splitlines()[-1] == "Message protected from noise level 0.5"


def test_export_basis(tmp_path, basis55):
    path = str(tmp_path / "modes.json")
    document = export_basis(basis55, path)
    with open(path, encoding="utf-8") as f:
        loaded = json.load(f)
    assert loaded == document
    assert loaded["mode_count"] == 55
    assert loaded["modes"][0]["label"] == "LP01"


def test_heatmap_is_reproducible(tmp_path):
    first, second = tmp_path / "a.svg", tmp_path / "b.svg"
    write_heatmap(small_report(), "eve", str(first))
    write_heatmap(small_report(), "eve", str(second))
    assert first.read_bytes() == second.read_bytes()
    assert b"<svg" in first.read_bytes()


def test_write_heatmaps(tmp_path):
    paths = write_heatmaps(small_report(), str(tmp_path))
    assert [p.rsplit("/", 1)[-1] for p in paths] == ["bob_snr.svg", "eve_snr.svg"]
    assert all((tmp_path / name).stat().st_size > 0 for name in ["bob_snr.svg", "eve_snr.svg"])
