import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from schauderlab.errors import InvalidArgument
from schauderlab.fieldio import export_slice_csv, load_field, save_field
from schauderlab.fields import SpaceTimeField
from schauderlab.geometry import Grid


@given(st.sampled_from(["txt", "bin"]), st.integers(1, 3), st.integers(0, 10 ** 6), st.booleans())
def test_round_trip(tmp_path_factory, fmt, k, seed, two_d):
    g = Grid((0.0, -1.0), (1.0, 2.0), (8, 9), 0.3, 0.1) if two_d else Grid((0.0,), (2.0,), (10,), 0.3, 0.1)
    vals = np.random.default_rng(seed).normal(size=(g.n_t, *g.shape, k))
    u = SpaceTimeField(g, vals)
    path = tmp_path_factory.mktemp("io") / f"u.{fmt}"
    back = load_field(save_field(u, path, fmt))
    assert back.grid == g
    assert np.array_equal(back.values, u.values)


def test_text_header(tmp_path):
    g = Grid((0.0,), (1.0,), (8,), 0.2, 0.1)
    path = save_field(SpaceTimeField(g, np.zeros((g.n_t, 8, 1))), tmp_path / "u.txt")
    head = path.read_text().splitlines()[:4]
    assert head[0].startswith("# schauderlab-field") and head[1] == "d 1" and head[2] == "n 8"


def test_bad_file(tmp_path):
    bad = tmp_path / "bad.txt"
    bad.write_text("nonsense\n")
    with pytest.raises(InvalidArgument):
        load_field(bad)


def test_slice_csv(tmp_path):
    g = Grid((0.0, 0.0), (1.0, 1.0), (8, 8), 0.2, 0.1)
    u = SpaceTimeField.from_function(g, lambda x, t: x[..., 0] + t)
    lines = export_slice_csv(u, 1, tmp_path / "s.csv").read_text().splitlines()
    assert len(lines) == 1 + 64
