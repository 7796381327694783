import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from eqboot.experiments import CoverageCurve
from eqboot.io import (coverage_svg, load_scaled_pgm, read_coverage_csv, read_pgm, save_scaled_pgm,
                       write_coverage_csv, write_pgm)


@settings(max_examples=30, deadline=None)
@given(arrays(np.int64, st.tuples(st.integers(1, 9), st.integers(1, 9)), elements=st.integers(0, 65535)))
def test_pgm_roundtrip_exact(tmp_path_factory, pixels):
    path = tmp_path_factory.mktemp("pgm") / "a.pgm"
    write_pgm(path, pixels)
    np.testing.assert_array_equal(read_pgm(path), pixels)


def test_pgm_header_and_byte_order(tmp_path):
    path = tmp_path / "b.pgm"
    write_pgm(path, np.array([[1, 258]]))
    assert path.read_bytes() == b"P5\n2 1\n65535\n\x00\x01\x01\x02"


def test_pgm_rejects_bad_input(tmp_path):
    with pytest.raises(ValueError):
        write_pgm(tmp_path / "c.pgm", np.array([[70000]]))
    with pytest.raises(ValueError):
        write_pgm(tmp_path / "c.pgm", np.zeros(3, dtype=int))
    (tmp_path / "d.pgm").write_bytes(b"P2\n1 1\n255\n0")
    with pytest.raises(ValueError):
        read_pgm(tmp_path / "d.pgm")


def test_scaled_pgm(tmp_path):
    img = np.linspace(-1.0, 3.0, 12).reshape(3, 4)
    scale = save_scaled_pgm(tmp_path / "s.pgm", img)
    assert scale == {"min": -1.0, "max": 3.0, "maxval": 65535}
    ints = read_pgm(tmp_path / "s.pgm")
    assert ints.min() == 0 and ints.max() == 65535
    np.testing.assert_allclose(load_scaled_pgm(tmp_path / "s.pgm"), img, atol=4.0 / 65535)
    save_scaled_pgm(tmp_path / "z.pgm", np.zeros((2, 2)))
    np.testing.assert_array_equal(read_pgm(tmp_path / "z.pgm"), 0)


def test_coverage_csv_roundtrip(tmp_path):
    curves = [CoverageCurve([0.5, 0.9], [0.25, 0.875], 8, "naive"),
              CoverageCurve([0.5, 0.9], [0.5, 1.0], 8, "shifts")]
    write_coverage_csv(tmp_path / "c.csv", curves)
    lines = (tmp_path / "c.csv").read_text().splitlines()
    assert lines[0] == "method,level,empirical,n_trials"
    assert lines[1] == "naive,0.5,0.25,8"
    back = read_coverage_csv(tmp_path / "c.csv")
    assert back["shifts"] == [(0.5, 0.5, 8), (0.9, 1.0, 8)]


def test_svg_has_diagonal_and_curves():
    svg = coverage_svg([CoverageCurve([0.1, 0.9], [0.2, 0.8], 5, "a<b")])
    assert svg.startswith("<svg") and svg.rstrip().endswith("</svg>")
    assert "stroke-dasharray" in svg
    assert svg.count("<polyline") == 4
    assert "a&lt;b" in svg
