import warnings

import numpy as np
import pytest
from hypothesis import given, strategies as st

from nonlocal_tse.core import (DensityField, FDParams, Grid, InvalidInputError, SpeedField,
                               greenshields_flow, greenshields_speed,
                               nonlocal_greenshields_speed, read_field_csv)


def test_fd_params_rejects_non_positive():
    for bad in [(0.0, 0.11), (54.3, -1.0), (float("nan"), 0.1), (float("inf"), 0.1)]:
        with pytest.raises(InvalidInputError):
            FDParams(*bad)


@pytest.mark.parametrize("rho,expected", [(0.0, 54.30), (0.11, 0.0), (0.055, 27.15)])
def test_speed_examples(fd, rho, expected):
    assert greenshields_speed(rho, fd) == pytest.approx(expected, abs=1e-12)


@pytest.mark.parametrize("rho,expected", [(0.0, 0.0), (0.11, 0.0), (0.055, 54.30 * 0.11 / 4)])
def test_flow_examples(fd, rho, expected):
    assert greenshields_flow(rho, fd) == pytest.approx(expected, abs=1e-12)
    assert greenshields_flow(0.055, fd) == pytest.approx(1.49325, abs=1e-12)


def test_nonlocal_speed_examples(fd):
    assert nonlocal_greenshields_speed(0.0, fd) == fd.v_f
    assert nonlocal_greenshields_speed(fd.rho_m, fd) == 0.0
    rho = np.linspace(0, fd.rho_m, 17)
    assert np.array_equal(nonlocal_greenshields_speed(rho, fd), greenshields_speed(rho, fd))


def test_super_jam_speed_is_negative_not_clamped(fd):
    assert greenshields_speed(0.2, fd) < 0


@pytest.mark.parametrize("fn", [greenshields_speed, greenshields_flow, nonlocal_greenshields_speed])
def test_non_finite_rejected(fd, fn):
    with pytest.raises(InvalidInputError):
        fn(np.array([0.01, np.nan]), fd)
    with pytest.raises(InvalidInputError):
        fn(float("inf"), fd)


@given(st.floats(0.0, 1.0))
def test_flow_is_rho_times_speed_bitwise(frac):
    fd = FDParams(54.30, 0.11)
    rho = frac * fd.rho_m
    assert greenshields_flow(rho, fd) == rho * greenshields_speed(rho, fd)


def test_speed_decreasing_and_flow_peak(fd):
    rho = np.linspace(0.0, fd.rho_m, 10_001)
    assert np.all(np.diff(greenshields_speed(rho, fd)) < 0)
    q = greenshields_flow(rho, fd)
    assert rho[np.argmax(q)] == pytest.approx(fd.rho_m / 2, abs=fd.rho_m / 10_000)


def test_grid_validation_and_centers():
    g = Grid.from_cells(100.0, 20.0, 4, 10.0, 5.0, 3)
    assert g.x1 == 180.0 and g.t1 == 25.0
    assert np.allclose(g.x_centers(), [110, 130, 150, 170])
    assert np.allclose(g.t_centers(), [12.5, 17.5, 22.5])
    assert g.x_center(2) == g.x_center(2)
    xx, tt = g.mesh()
    assert xx.shape == tt.shape == (4, 3)
    with pytest.raises(InvalidInputError):
        Grid(0.0, 100.0, 0.0, 10.0, 20.0, 5.0, 4, 2)     # 4*20 != 100
    with pytest.raises(InvalidInputError):
        Grid.from_cells(0.0, 20.0, 1, 0.0, 5.0, 3)
    with pytest.raises(InvalidInputError):
        Grid.from_cells(0.0, -20.0, 3, 0.0, 5.0, 3)


@given(st.integers(0, 119))
def test_cell_center_reproducible(i):
    g = Grid.from_cells(0.3, 20.1, 120, 0.0, 5.0, 60)
    assert g.x_center(i) == g.x_center(i) == g.x_centers()[i]


def test_density_field_validation(grid):
    with pytest.raises(InvalidInputError):
        DensityField(grid, -np.ones(grid.shape))
    with pytest.raises(InvalidInputError):
        DensityField(grid, np.full(grid.shape, np.nan))
    with pytest.raises(InvalidInputError):
        DensityField(grid, np.ones((3, 3)))
    f = DensityField(grid, np.zeros(grid.shape))
    with pytest.raises(ValueError):
        f.values[0, 0] = 1.0


def test_density_suspect_warning(grid, fd):
    vals = np.full(grid.shape, 0.05)
    vals[3, 4] = 0.2
    f = DensityField(grid, vals)
    with pytest.warns(UserWarning, match="1.5"):
        assert not f.check_against(fd)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        assert DensityField(grid, np.full(grid.shape, 0.1)).check_against(fd)


def test_density_csv_round_trip_bit_exact(tmp_path, rng):
    g = Grid.from_cells(0.1, 20.0 / 3.0, 7, 2.5, 5.0 / 7.0, 5)
    vals = rng.random(g.shape) * 0.11
    vals[0, 0] = 5e-324
    vals[1, 1] = 0.1 + 0.2
    DensityField(g, vals).to_csv(tmp_path / "d.csv")
    back = DensityField.from_csv(tmp_path / "d.csv")
    assert back.grid == g
    assert np.array_equal(back.values, vals)
    lines = (tmp_path / "d.csv").read_text().splitlines()
    assert lines[0] == "# grid,x0,length,t0,duration,dx,dt,nx,nt"
    assert lines[2] == "i,j,value"
    assert lines[3].startswith("0,0,") and lines[4].startswith("0,1,")


def test_speed_csv_round_trip_with_mask(tmp_path, grid, rng):
    vals = rng.random(grid.shape) * 60
    mask = rng.random(grid.shape) > 0.3
    SpeedField(grid, vals, mask).to_csv(tmp_path / "s.csv")
    back = SpeedField.from_csv(tmp_path / "s.csv")
    assert np.array_equal(back.mask, mask)
    assert np.array_equal(back.values[mask], vals[mask])
    assert np.all(np.isnan(back.values[~mask]))


def test_malformed_csv(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("hello\n")
    with pytest.raises(InvalidInputError):
        read_field_csv(p)
