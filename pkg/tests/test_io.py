import os

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from tfspec.io import atomic_write, read_field, write_field
from tfspec.plotting import ambiguity_figure, save_png, tf_figure, windows_figure, zscore_figure

finite = st.floats(allow_nan=False, allow_infinity=False, width=64)


@settings(max_examples=40, deadline=None)
@given(re=arrays(np.float64, (4, 6), elements=finite), im=arrays(np.float64, (4, 6), elements=finite),
       fmt=st.sampled_from(["csv", "f64bin"]))
def test_round_trip_bit_exact(tmp_path_factory, re, im, fmt):
    d = tmp_path_factory.mktemp("rt")
    path = os.path.join(d, "f.csv" if fmt == "csv" else "f.f64")
    values = re + 1j * im
    write_field(path, values, "tf", alpha=0.25, fmt=fmt, seed=9)
    back, meta = read_field(path)
    assert np.array_equal(back.view(np.float64), values.view(np.float64))
    assert meta["kind"] == "tf" and meta["alpha"] == 0.25


def test_csv_header_layout(tmp_path):
    path = tmp_path / "x.csv"
    write_field(path, np.array([[1 + 2j, 3.5]]), "signal")
    lines = path.read_text().splitlines()
    assert lines[0] == "# rows=1 cols=2 kind=signal alpha=0.0"
    assert lines[1] == "1.0,2.0,3.5,0.0"


def test_f64bin_sidecar(tmp_path):
    path = tmp_path / "x.f64"
    written = write_field(path, np.eye(3), "kernel", fmt="f64bin", seed=4)
    assert len(written) == 2
    raw = np.fromfile(path, dtype="<f8")
    assert raw.size == 18 and raw[0] == 1.0 and raw[1] == 0.0
    _, meta = read_field(path)
    assert meta["seed"] == 4


@pytest.mark.parametrize("text", ["", "1,2\n", "# rows=2 cols=1 kind=tf alpha=0\n1,2\n",
                                  "# rows=1 cols=2 kind=tf alpha=0\n1,2\n", "# rows=1 cols=1 kind=tf alpha=0\n1,a\n"])
def test_malformed_csv(tmp_path, text):
    path = tmp_path / "bad.csv"
    path.write_text(text)
    with pytest.raises(ValueError):
        read_field(path)


def test_bad_format_and_kind(tmp_path):
    with pytest.raises(ValueError, match="format"):
        write_field(tmp_path / "a", np.eye(2), "tf", fmt="xml")
    with pytest.raises(ValueError, match="kind"):
        write_field(tmp_path / "a", np.eye(2), "blob")


def test_atomic_write_leaves_no_temporaries(tmp_path):
    atomic_write(tmp_path / "a.txt", "hello")
    atomic_write(tmp_path / "a.txt", b"again")
    assert os.listdir(tmp_path) == ["a.txt"]
    assert (tmp_path / "a.txt").read_bytes() == b"again"


def test_figures_are_deterministic(tmp_path, rng):
    F = rng.standard_normal((8, 8))
    figs = {
        "tf": lambda: tf_figure(F, "EW", 0.0),
        "ea": lambda: ambiguity_figure(F + 1j * F),
        "win": lambda: windows_figure(F[:3]),
        "z": lambda: zscore_figure(F, F.T),
    }
    for name, make in figs.items():
        a = save_png(make(), tmp_path / f"{name}1.png")
        b = save_png(make(), tmp_path / f"{name}2.png")
        data = open(a, "rb").read()
        assert data[:8] == b"\x89PNG\r\n\x1a\n"
        assert data == open(b, "rb").read()
