import math

import numpy as np
import pytest

from oslab.billiard import (
    BoundaryPhasePoint,
    StepKind,
    advance,
    box_counting_dimension,
    find_periodic_orbit,
    flight_time,
    inverse_step,
    jacobian,
    jacobian_analytic,
    lift,
    lyapunov_estimate,
    step,
    trapped_set_cover,
)
from oslab.errors import Glancing, InvalidWord, NearGlancing, NoHit
from oslab.geometry import ObstacleConfig, check_no_eclipse, equilateral_config, random_config

from oracles import brute_force_orbit_length, ray_circle_entry


def two_discs(distance=6.0):
    return ObstacleConfig.from_arrays([[0, 0], [distance, 0]], 1.0)


def no_eclipse_configs(seed, count, n=3, box=10.0):
    rng = np.random.default_rng(seed)
    out = []
    while len(out) < count:
        config = random_config(rng, n, box=box)
        if check_no_eclipse(config):
            out.append(config)
    return out


def random_hits(config, rng, count, margin=0.95):
    pts = []
    while len(pts) < count:
        j = int(rng.integers(len(config)))
        rho = BoundaryPhasePoint(j, rng.uniform(0, config.perimeters[j]), rng.uniform(-margin, margin))
        result = step(config, rho)
        if result.kind is StepKind.HIT_PLUS and abs(result.arrival.eta) < margin:
            pts.append((rho, result))
    return pts


def test_lift_normal_shot():
    point, direction = lift(two_discs(), BoundaryPhasePoint(0, 0.0, 0.0))
    assert np.allclose(point, [1, 0]) and np.allclose(direction, [1, 0])


def test_lift_rejects_glancing():
    with pytest.raises(Glancing):
        lift(two_discs(), BoundaryPhasePoint(0, 0.0, 1.0))


def test_lift_normal_component():
    rng = np.random.default_rng(0)
    config = equilateral_config(6.0)
    for _ in range(100):
        rho = BoundaryPhasePoint(int(rng.integers(3)), rng.uniform(0, 2 * math.pi), rng.uniform(-0.999, 0.999))
        point, direction = lift(config, rho)
        normal = (point - config.centers[rho.obstacle]) / config.radii[rho.obstacle]
        assert abs(normal @ direction - math.sqrt(1 - rho.eta**2)) < 1e-12
        assert abs(np.linalg.norm(direction) - 1) < 1e-12


def test_axis_shot_hits_second_disc():
    result = step(two_discs(), BoundaryPhasePoint(0, 0.0, 0.0))
    assert result.kind is StepKind.HIT_PLUS and result.target == 1
    assert result.time == pytest.approx(4.0, abs=1e-14)
    assert result.arrival.eta == pytest.approx(0.0, abs=1e-14)
    # arrival point (5, 0) has angle pi on disc 2
    assert result.arrival.s == pytest.approx(math.pi, abs=1e-12)


def test_miss_escapes():
    result = step(two_discs(), BoundaryPhasePoint(0, 0.0, 0.5))
    assert result.kind is StepKind.ESCAPE
    with pytest.raises(NoHit):
        flight_time(two_discs(), BoundaryPhasePoint(0, 0.0, 0.5))


def test_tangent_ray_is_glancing():
    # from (1, 0) aim along a tangent line of disc 2
    config = two_discs()
    p = np.array([1.0, 0.0])
    dist = 5.0
    angle = math.asin(1.0 / dist)
    direction = np.array([math.cos(angle), math.sin(angle)])
    eta = float(direction @ np.array([0.0, 1.0]))
    with pytest.raises(Glancing):
        step(config, BoundaryPhasePoint(0, 0.0, eta))
    assert p is not None


def test_arrival_matches_quadratic_oracle():
    rng = np.random.default_rng(1)
    config = equilateral_config(6.0)
    checked = 0
    while checked < 1000:
        j = int(rng.integers(3))
        rho = BoundaryPhasePoint(j, rng.uniform(0, 2 * math.pi), rng.uniform(-0.99, 0.99))
        try:
            result = step(config, rho)
        except Glancing:
            continue
        point, direction = lift(config, rho)
        hits = [(ray_circle_entry(point, direction, c, r), i)
                for i, (c, r) in enumerate(zip(config.centers, config.radii)) if i != j]
        hits = [h for h in hits if h[0] is not None]
        if not hits:
            assert result.kind is StepKind.ESCAPE
            checked += 1
            continue
        t, i = min(hits)
        assert result.target == i
        assert abs(result.time - t) < 1e-12
        arrival, _ = lift(config, BoundaryPhasePoint(i, result.arrival.s, 0.0))
        assert np.max(np.abs(arrival - (point + t * direction))) < 1e-12
        checked += 1


def test_flight_time_equal_on_triangle_orbit():
    config = equilateral_config(6.0)
    orbit = find_periodic_orbit(config, (0, 1, 2))
    times = [flight_time(config, rho) for rho in orbit.points]
    assert max(times) - min(times) < 1e-10


def test_flight_time_is_step_time():
    config = equilateral_config(6.0)
    for rho, result in random_hits(config, np.random.default_rng(2), 50):
        assert flight_time(config, rho) == result.time


def test_vectorised_advance_matches_scalar():
    config = equilateral_config(6.0)
    rng = np.random.default_rng(3)
    j = rng.integers(0, 3, 500)
    s = rng.uniform(0, 2 * math.pi, 500)
    eta = rng.uniform(-0.99, 0.99, 500)
    target, s1, e1, t, status = advance(config, j, s, eta)
    for n in range(0, 500, 7):
        result = step(config, BoundaryPhasePoint(int(j[n]), s[n], eta[n]))
        if result.kind is StepKind.ESCAPE:
            assert status[n] == 0
        else:
            assert target[n] == result.target and s1[n] == result.arrival.s and t[n] == result.time


def test_time_reversal():
    rng = np.random.default_rng(4)
    for config in no_eclipse_configs(4, 5):
        for rho, result in random_hits(config, rng, 200):
            back = step(config, result.arrival.reversed())
            assert back.target == rho.obstacle
            ds = (back.arrival.s - rho.s + 0.5 * config.perimeters[rho.obstacle]) % config.perimeters[rho.obstacle]
            assert abs(ds - 0.5 * config.perimeters[rho.obstacle]) < 1e-10
            assert abs(back.arrival.eta + rho.eta) < 1e-10
            pre = inverse_step(config, result.arrival)
            assert abs(pre.arrival.eta - rho.eta) < 1e-10


def test_shadow_branch_exits_same_obstacle():
    config = two_discs()
    result = step(config, BoundaryPhasePoint(0, 0.0, 0.0), "minus")
    assert result.kind is StepKind.HIT_MINUS and result.target == 1
    assert result.time == pytest.approx(6.0)
    assert result.arrival.s == pytest.approx(0.0, abs=1e-12) or result.arrival.s == pytest.approx(2 * math.pi)
    assert not result.occluded


def test_shadow_then_step_escapes_without_eclipse():
    rng = np.random.default_rng(5)
    for config in no_eclipse_configs(5, 10):
        for _ in range(300):
            j = int(rng.integers(3))
            rho = BoundaryPhasePoint(j, rng.uniform(0, config.perimeters[j]), rng.uniform(-0.99, 0.99))
            try:
                shadow = step(config, rho, "minus")
            except Glancing:
                continue
            if shadow.kind is StepKind.ESCAPE:
                continue
            assert not shadow.occluded
            for branch in ("plus", "minus"):
                try:
                    follow = step(config, shadow.arrival, branch)
                except Glancing:
                    continue
                assert follow.kind is StepKind.ESCAPE


def test_occlusion_is_flagged_in_eclipsing_config():
    # a third disc sits right behind disc 2 on the axis
    config = ObstacleConfig.from_arrays([[0, 0], [6, 0], [10, 0]], 1.0)
    result = step(config, BoundaryPhasePoint(0, 0.0, 0.0), "minus")
    assert result.target == 1 and result.occluded


def test_jacobian_agrees_with_disc_formula():
    rng = np.random.default_rng(6)
    worst = 0.0
    for config in no_eclipse_configs(6, 10):
        for rho, _ in random_hits(config, rng, 100):
            fd = jacobian(config, rho)
            exact = jacobian_analytic(config, rho)
            worst = max(worst, float(np.max(np.abs(fd - exact))))
    assert worst <= 1e-6


def test_jacobian_determinant_is_one():
    rng = np.random.default_rng(7)
    for config in no_eclipse_configs(7, 5):
        for rho, _ in random_hits(config, rng, 100):
            assert abs(np.linalg.det(jacobian_analytic(config, rho)) - 1) < 1e-10
            assert abs(np.linalg.det(jacobian(config, rho)) - 1) < 1e-5


def test_jacobian_near_escape_boundary_raises():
    config = two_discs()
    # aim just inside the tangent to disc 2
    eta = 1.0 / 5.0 * (1 - 1e-7)
    with pytest.raises(NearGlancing):
        jacobian(config, BoundaryPhasePoint(0, 0.0, eta), rel_step=1e-3)


def test_two_disc_orbit():
    orbit = find_periodic_orbit(two_discs(), (0, 1))
    assert abs(orbit.length - 8) < 1e-10
    assert np.allclose(orbit.points[0].s, 0.0, atol=1e-10) or np.allclose(orbit.points[0].s, 2 * math.pi)
    mu = orbit.multipliers
    assert np.all(np.isreal(mu)) and abs(mu[0]) > 1 > abs(mu[1])
    assert abs(np.linalg.det(orbit.monodromy) - 1) < 1e-8


def test_two_disc_monodromy_against_composed_differences():
    config = two_discs()
    orbit = find_periodic_orbit(config, (0, 1))
    composed = jacobian(config, orbit.points[1]) @ jacobian(config, orbit.points[0])
    assert np.max(np.abs(composed - orbit.monodromy)) < 1e-6
    # closed form for unit discs with gap l: mu = (1 + l + sqrt(l (2 + l)))^2
    gap = 4.0
    mu = (1 + gap + math.sqrt(gap * (2 + gap))) ** 2
    assert orbit.mu == pytest.approx(mu, rel=1e-12)
    trace = mu + 1 / mu
    assert orbit.monodromy.trace() == pytest.approx(trace, rel=1e-10)


def test_triangle_orbit_matches_brute_force():
    config = equilateral_config(6.0)
    orbit = find_periodic_orbit(config, (0, 1, 2))
    oracle = brute_force_orbit_length(config.centers, config.radii, (0, 1, 2))
    assert abs(orbit.length - oracle) < 1e-8
    assert orbit.reflection_residual < 1e-10


def test_random_config_orbits_match_brute_force():
    for config in no_eclipse_configs(8, 3, box=8.0):
        for word in [(0, 1), (0, 1, 2)]:
            orbit = find_periodic_orbit(config, word)
            oracle = brute_force_orbit_length(config.centers, config.radii, word)
            assert abs(orbit.length - oracle) < 1e-8


@pytest.mark.parametrize("word", [(0, 0, 1), (0, 1, 0), (0,), (0, 5)])
def test_invalid_words(word):
    with pytest.raises(InvalidWord):
        find_periodic_orbit(equilateral_config(6.0), word)


def test_monodromy_spectrum_hyperbolic_on_random_configs():
    for config in no_eclipse_configs(9, 8):
        for word in [(0, 1), (1, 2), (0, 1, 2), (0, 2, 1)]:
            orbit = find_periodic_orbit(config, word)
            mu = orbit.multipliers
            assert abs(mu[0].imag) < 1e-9 and abs(mu[0]) > 1
            assert abs(mu[0] * mu[1] - 1) < 1e-6
            assert orbit.lyapunov > 0


def test_lyapunov_grows_with_distance():
    rates = [lyapunov_estimate(two_discs(L), (0, 1)) for L in (4.0, 6.0, 10.0)]
    assert rates[0] < rates[1] < rates[2]
    orbit = find_periodic_orbit(two_discs(6.0), (0, 1))
    assert rates[1] == pytest.approx(math.log(orbit.mu) / 2)


def test_cover_depth_zero_is_full_rectangles():
    config = equilateral_config(12.0)
    cover = trapped_set_cover(config, 0)
    assert cover.box_count == 3
    assert cover.total_area == pytest.approx(3 * 2 * math.pi * 2)


def test_cover_is_nested_and_area_nonincreasing():
    config = equilateral_config(12.0)
    cover = trapped_set_cover(config, 6)
    areas = [h[2] for h in cover.history]
    assert all(b <= a + 1e-12 for a, b in zip(areas, areas[1:]))
    coarse = trapped_set_cover(config, 5)
    for fine_boxes, coarse_boxes in zip(cover.boxes, coarse.boxes):
        for box in fine_boxes:
            inside = ((coarse_boxes[:, 0] <= box[0]) & (box[1] <= coarse_boxes[:, 1])
                      & (coarse_boxes[:, 2] <= box[2]) & (box[3] <= coarse_boxes[:, 3]))
            assert inside.any()


def test_cover_contains_periodic_points():
    config = equilateral_config(12.0)
    cover = trapped_set_cover(config, 8)
    for word in [(0, 1), (0, 1, 2), (0, 2, 1)]:
        for rho in find_periodic_orbit(config, word).points:
            boxes = cover.boxes[rho.obstacle]
            inside = ((boxes[:, 0] <= rho.s) & (rho.s <= boxes[:, 1])
                      & (boxes[:, 2] <= rho.eta) & (rho.eta <= boxes[:, 3]))
            assert inside.any()


def test_cover_dimension_between_zero_and_two():
    cover = trapped_set_cover(equilateral_config(12.0), 8)
    dim = box_counting_dimension(cover)
    assert 0 < dim < 2


def test_literal_orbit_rule_underresolves_strong_expansion():
    # only boxes whose grid hits a periodic point exactly survive the orbit rule
    config = equilateral_config(12.0)
    literal = trapped_set_cover(config, 6, method="orbit")
    counts = [c for _, c, _ in literal.history[2:]]
    assert max(counts) == min(counts)
    assert trapped_set_cover(config, 6).box_count > 4 * literal.box_count


def test_lyapunov_from_cover_is_positive():
    config = equilateral_config(12.0)
    rate = lyapunov_estimate(config, trapped_set_cover(config, 6))
    orbit_rate = find_periodic_orbit(config, (0, 1)).lyapunov
    assert rate > 0
    assert abs(rate - orbit_rate) / orbit_rate < 0.3
