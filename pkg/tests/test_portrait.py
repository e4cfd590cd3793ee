import json

import numpy as np
import pytest

from phaseclusters.cluster_algebra import reduced_vector_field
from phaseclusters.coupling import FourierCoupling, preset, wrap_signed
from phaseclusters.portrait import (
    FixedPointKind,
    check_full_system,
    classify,
    cluster_swap_maps,
    difference_field,
    difference_jacobian,
    export_portrait,
    find_fixed_points,
    lift_uv,
    uv_of_phases,
)
from phaseclusters.simulator import saddle_set
from phaseclusters.stability import tangential_eigenvalues


@pytest.fixture(scope="module")
def case1_points():
    return find_fixed_points(preset("case1"), (2, 2, 2))


def _near(fps, uv, tol=1e-6):
    return [fp for fp in fps if np.linalg.norm(wrap_signed(np.array([fp.u, fp.v]) - uv)) < tol]


def test_field_examples(states):
    g0 = preset("case0")
    np.testing.assert_allclose(difference_field(g0, (2, 2, 2), (-np.pi, -np.pi / 2)), [0, 0], atol=1e-15)
    for name in ("case0", "case1", "case2"):
        assert np.all(difference_field(preset(name), (2, 2, 2), (0.0, 0.0)) == 0.0)
    s = states["case1"]
    uv = uv_of_phases(s.phases)
    np.testing.assert_allclose(difference_field(preset("case1"), (2, 2, 2), uv), [0, 0], atol=1e-12)


def test_field_matches_cluster_velocities():
    rng = np.random.default_rng(0)
    g = preset("case2")
    for sizes in [(2, 2, 2), (1, 2, 3), (4, 1, 1)]:
        u, v = rng.uniform(0, 2 * np.pi, 2)
        F = reduced_vector_field(g, sizes, [u, v, 0.0], omega=3.0)
        np.testing.assert_allclose(difference_field(g, sizes, (u, v)), [F[0] - F[2], F[1] - F[2]], atol=1e-14)


def test_field_vectorized_and_periodic():
    g = preset("case1")
    rng = np.random.default_rng(1)
    uv = rng.uniform(0, 2 * np.pi, (50, 2))
    out = difference_field(g, (2, 2, 2), uv)
    assert out.shape == (50, 2)
    np.testing.assert_allclose(out, difference_field(g, (2, 2, 2), uv + 2 * np.pi), atol=1e-12)
    np.testing.assert_allclose(out[7], difference_field(g, (2, 2, 2), uv[7]), atol=1e-15)


def test_jacobian_matches_fd():
    rng = np.random.default_rng(2)
    g = preset("case1")
    for sizes in [(2, 2, 2), (1, 2, 3)]:
        x = rng.uniform(0, 2 * np.pi, 2)
        J = difference_jacobian(g, sizes, x)
        h = 1e-6
        fd = np.column_stack([
            (difference_field(g, sizes, x + e) - difference_field(g, sizes, x - e)) / (2 * h)
            for e in (np.array([h, 0]), np.array([0, h]))
        ])
        np.testing.assert_allclose(J, fd, atol=1e-8)


def test_needs_three_clusters():
    with pytest.raises(ValueError):
        difference_field(preset("case1"), (3, 3), (0.0, 1.0))
    with pytest.raises(ValueError):
        find_fixed_points(preset("case1"), (2, 2, 2), grid_density=4)
    with pytest.raises(ValueError):
        export_portrait(preset("case1"), (2, 2, 2), resolution=8)


def test_classify():
    assert classify([-1, -2]) is FixedPointKind.SINK
    assert classify([1, 2]) is FixedPointKind.SOURCE
    assert classify([-1, 2]) is FixedPointKind.SADDLE
    assert classify([-1, 1e-9]) is FixedPointKind.NON_HYPERBOLIC
    assert classify([-1 + 1j, -1 - 1j]) is FixedPointKind.SINK


def test_fixed_point_invariants(case1_points):
    g = preset("case1")
    assert case1_points == sorted(case1_points, key=lambda fp: (fp.u, fp.v))
    for fp in case1_points:
        assert np.max(np.abs(difference_field(g, (2, 2, 2), (fp.u, fp.v)))) < 1e-10
        assert classify(fp.jacobian_eigenvalues) is fp.kind
        assert check_full_system(g, (2, 2, 2), fp) < 1e-9
        assert 0 <= fp.u < 2 * np.pi and 0 <= fp.v < 2 * np.pi
    pts = np.array([[fp.u, fp.v] for fp in case1_points])
    gaps = np.linalg.norm(wrap_signed(pts[:, None] - pts[None, :]), axis=-1)
    np.fill_diagonal(gaps, np.inf)
    assert gaps.min() > 1e-6


def test_saddle_images_are_sinks(case1_points, states):
    g = preset("case1")
    s = states["case1"]
    S = saddle_set(s.phases[1], s.phases[2])
    for k in range(1, 7):
        phases = S.cluster_phases(k)
        match = _near(case1_points, uv_of_phases(phases))
        assert len(match) == 1 and match[0].kind is FixedPointKind.SINK
        tang = tangential_eigenvalues(g, (2, 2, 2), phases)
        nontrivial = np.sort(tang[np.argsort(np.abs(tang))[1:]].real)
        np.testing.assert_allclose(np.sort(np.real(match[0].jacobian_eigenvalues)), nontrivial, atol=1e-8)
    kinds = {fp.kind for fp in case1_points}
    assert FixedPointKind.SOURCE in kinds and FixedPointKind.SADDLE in kinds


def test_swap_symmetry(case1_points):
    maps = cluster_swap_maps((2, 2, 2))
    assert len(maps) == 3
    pts = np.array([[fp.u, fp.v] for fp in case1_points])
    for f in maps:
        for fp in case1_points:
            image = np.array(f(fp.u, fp.v))
            assert len(_near(case1_points, image, 1e-8)) == 1
    assert cluster_swap_maps((1, 2, 3)) == []
    assert len(pts) == len(case1_points)


def test_zero_coupling_is_degenerate():
    fps = find_fixed_points(FourierCoupling((0.0,), ()), (2, 2, 2), grid_density=8)
    assert len(fps) == 64
    assert all(fp.kind is FixedPointKind.NON_HYPERBOLIC for fp in fps)


def test_lift():
    np.testing.assert_allclose(lift_uv((2, 2, 2), (1.0, 2.0)), [1, 1, 2, 2, 0, 0])


def test_export(case1_points):
    p = export_portrait(preset("case1"), (2, 2, 2), resolution=64)
    assert p.samples.shape == (4096, 4)
    csv = p.to_csv().splitlines()
    assert csv[0] == "u,v,du,dv" and len(csv) == 4097
    listed = json.loads(p.fixed_points_json())
    assert len(listed) == len(case1_points)
    for a, b in zip(listed, case1_points):
        assert abs(a["u"] - b.u) < 1e-9 and abs(a["v"] - b.v) < 1e-9 and a["kind"] == b.kind.value
    # the first and last grid rows meet across the periodic edge
    g = preset("case1")
    first = p.samples[p.samples[:, 0] == 0.0]
    np.testing.assert_allclose(first[:, 2:], difference_field(g, (2, 2, 2), first[:, :2] + [2 * np.pi, 0]), atol=1e-12)
