import itertools

import numpy as np
import pytest

from contactkit.engine import Lattice, RateSpec, build_lattice
from contactkit.errors import ConfigError, SiteOutsideBoxError


def brute_ball(d, M):
    return [c for c in itertools.product(range(-M, M + 1), repeat=d) if sum(map(abs, c)) <= M]


@pytest.mark.parametrize("d,M,expected", [(1, 2, 5), (2, 1, 5), (2, 7, 113)])
def test_ball_sizes(d, M, expected):
    lat = build_lattice(d, M)
    assert lat.n_sites == expected == len(brute_ball(d, M))


@pytest.mark.parametrize("M", range(1, 10))
def test_two_dim_ball_formula(M):
    assert build_lattice(2, M).n_sites == 2 * M * M + 2 * M + 1


def test_one_dim_sites():
    lat = build_lattice(1, 2)
    assert [lat.site(i) for i in range(lat.n_sites)] == [(-2,), (-1,), (0,), (1,), (2,)]


@pytest.mark.parametrize("d,M", [(0, 3), (1, 0), (-1, 2), (2, -4)])
def test_invalid_dimensions(d, M):
    with pytest.raises(ConfigError):
        build_lattice(d, M)


@pytest.mark.parametrize("d,M", [(1, 4), (2, 3), (3, 2)])
def test_indexing_is_bijective_and_neighbors_consistent(d, M):
    lat = build_lattice(d, M)
    assert lat.neighbors.shape == (lat.n_sites, 2 * d)
    for i in range(lat.n_sites):
        x = lat.site(i)
        assert lat.index(x) == i
        for j in range(2 * d):
            y = lat.step(x, j)
            nb = lat.neighbors[i, j]
            if sum(map(abs, y)) <= M:
                assert nb == lat.index(y)
            else:
                assert nb == -1
                assert lat.is_boundary(i)


def test_outside_site_raises():
    lat = build_lattice(2, 2)
    assert (3, 0) not in lat
    with pytest.raises(SiteOutsideBoxError):
        lat.index((3, 0))


def test_custom_region():
    lat = Lattice(1, [(0,), (1,)])
    assert lat.n_sites == 2
    assert lat.neighbors.tolist() == [[1, -1], [-1, 0]]


def test_uniform_rates():
    lat = build_lattice(2, 3)
    r = RateSpec(lam=1.5).directed_rates(lat)
    assert r.shape == (lat.n_sites, 4) and (r == 1.5).all()


def test_environment_rates_symmetric_and_bounded():
    lat = build_lattice(2, 4)
    spec = RateSpec(lam_min=1.0, lam_max=3.0, env_seed=11)
    rates = spec.directed_rates(lat)
    assert ((rates >= 1.0) & (rates <= 3.0)).all()
    assert len(np.unique(rates)) > 10
    for i in range(lat.n_sites):
        for j in range(4):
            nb = lat.neighbors[i, j]
            if nb >= 0:
                back = j ^ 1  # opposite direction on the same axis
                assert rates[nb, back] == rates[i, j]


def test_environment_rates_depend_on_seed_only():
    a = RateSpec(lam_min=1.0, lam_max=3.0, env_seed=5)
    b = RateSpec(lam_min=1.0, lam_max=3.0, env_seed=5)
    c = RateSpec(lam_min=1.0, lam_max=3.0, env_seed=6)
    assert a.edge_rate((2, -1), 1) == b.edge_rate((2, -1), 1) != c.edge_rate((2, -1), 1)


@pytest.mark.parametrize("kw", [dict(lam=-1.0), dict(), dict(lam_min=2.0, lam_max=1.0), dict(lam=1.0, lam_min=1.0, lam_max=2.0)])
def test_bad_rate_specs(kw):
    with pytest.raises(ConfigError):
        RateSpec(**kw)
