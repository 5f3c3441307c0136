import math

import numpy as np
import pytest

from oslab.errors import BadDimension, SingularPower, SingularResolvent
from oslab.gap import (
    FAMILIES,
    neumann_resolvent,
    op_norm,
    power_decay_onset,
    power_norm_scan,
    resolvent_norm_scan,
    spectrum,
    steps_for,
)
from oslab.quant import TorusOperator, baker_open


def random_contraction(rng, n, scale=0.9):
    A = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    return scale * A / np.linalg.norm(A, 2)


def test_op_norm_matches_svd():
    rng = np.random.default_rng(0)
    for n in (5, 40, 81):
        A = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
        assert abs(op_norm(A) - np.linalg.svd(A, compute_uv=False)[0]) < 1e-8 * np.abs(A).max() * n
    assert op_norm(np.zeros((4, 4))) == 0.0


def test_op_norm_is_reproducible():
    A = baker_open(81).entries
    assert op_norm(A) == op_norm(A)


def test_steps_for():
    assert steps_for(math.exp(-3.5), 1.0) == 4
    assert steps_for(math.exp(-3.0), 2.0) == 6


def test_neumann_resolvent_matches_inverse():
    rng = np.random.default_rng(1)
    for n in (1, 3, 7):
        M = random_contraction(rng, 30)
        res = neumann_resolvent(M, n)
        direct = np.linalg.inv(np.eye(30) - M)
        assert np.allclose(res.R, direct, atol=1e-10)
        assert res.residual < 1e-12


def test_neumann_resolvent_singular_power():
    with pytest.raises(SingularPower):
        neumann_resolvent(np.eye(4), 2)
    with pytest.raises(ValueError):
        neumann_resolvent(np.zeros((2, 2)), 0)


def test_power_scan_zero_family_gives_infinite_gamma():
    report = power_norm_scan(FAMILIES["zero"], 1.0, [8, 16])
    assert report.fitted_gamma == math.inf
    assert all(e.power_norm == 0 for e in report.entries)


def test_power_scan_closed_baker_has_zero_gamma():
    report = power_norm_scan(FAMILIES["baker_closed"], 1.0, [27, 81])
    assert abs(report.fitted_gamma) < 1e-8
    assert [e.N_of_h for e in report.entries] == [steps_for(1 / (2 * math.pi * N), 1.0) for N in (27, 81)]


def test_power_scan_rows_and_validation():
    report = power_norm_scan(FAMILIES["baker_open"], 1.0, [27, 81])
    assert len(report.rows()) == 2
    assert report.columns == ("N", "h", "N_of_h", "power_norm", "amp_sup")
    with pytest.raises(ValueError):
        power_norm_scan(FAMILIES["baker_open"], 0.0, [27])
    with pytest.raises(BadDimension):
        power_norm_scan(FAMILIES["baker_open"], 1.0, [28])


def test_resolvent_scan_bound_and_flags():
    report = resolvent_norm_scan(FAMILIES["baker_open"], 1.0, 0.2, [27, 81], [0, 0.5j, -0.5j])
    assert len(report.entries) == 6
    for e in report.entries:
        M = baker_open(e.N).entries
        direct = np.linalg.norm(np.linalg.inv(np.eye(e.N) - np.exp(1j * e.z) * M), 2)
        assert abs(e.norm - direct) < 1e-9 * direct
        assert e.hypothesis_ok == (e.amp_sup < math.exp(0.2))
        assert abs(e.bound - 2 * abs(math.log(e.h)) * e.h ** (-math.log(e.A))) < 1e-9 * e.bound
    assert not report.violations


def test_resolvent_scan_h0_excludes_coarse_points():
    report = resolvent_norm_scan(FAMILIES["baker_open"], 1.0, 1.0, [27, 81], [0], h0=1e-4)
    assert not any(e.violation for e in report.entries)


def test_spectrum_sorted_and_capped():
    ev = spectrum(baker_open(27))
    assert np.all(np.diff(np.abs(ev)) <= 1e-12)
    assert np.abs(ev[0]) < 1
    with pytest.raises(BadDimension):
        spectrum(np.eye(10), cap=5)


def test_power_decay_onset():
    rng = np.random.default_rng(3)
    M = random_contraction(rng, 10)
    assert power_decay_onset(M, M) == 1
    assert power_decay_onset(M, 2 * M) is None
    assert power_decay_onset(M, 0.5 * M) == 1


def test_neumann_nilpotent_shift():
    M = np.diag([1.0, 1.0], k=1)
    res = neumann_resolvent(M, 3)
    assert np.allclose(res.R, np.eye(3) + M + M @ M, atol=0)
    assert res.residual <= 1e-14


def test_neumann_long_series_matches_direct_solve():
    rng = np.random.default_rng(7)
    M = random_contraction(rng, 40, 0.9)
    res = neumann_resolvent(M, 50)
    assert np.max(np.abs(res.R - np.linalg.solve(np.eye(40) - M, np.eye(40)))) < 1e-10


def test_neumann_zero_matrix_gives_identity():
    res = neumann_resolvent(np.zeros((5, 5)), 4)
    assert np.array_equal(res.R, np.eye(5))


def test_small_contraction_resolvent_below_two():
    def family(N):
        rng = np.random.default_rng(N)
        return TorusOperator(random_contraction(rng, N, 0.5))

    report = resolvent_norm_scan(family, 1.0, 0.5, [16, 64, 256], [0, 0.3, -0.2j])
    assert all(e.norm <= 2 + 1e-12 for e in report.entries)
    assert not report.violations


def test_open_baker_resolvent_grows_at_most_polynomially():
    report = resolvent_norm_scan(FAMILIES["baker_open"], 1.0, 0.1, [27, 81, 243, 729], [0])
    ratios = [math.log(e.norm) / math.log(1 / e.h) for e in report.entries]
    assert max(ratios) < 1.0


def test_damping_past_threshold_disables_hypothesis():
    report = resolvent_norm_scan(FAMILIES["baker_open"], 1.0, 0.1, [27], [-2j])
    (entry,) = report.entries
    assert entry.amp_sup >= math.exp(0.1)
    assert not entry.hypothesis_ok and not entry.violation


def test_closed_baker_spectrum_on_unit_circle():
    ev = spectrum(FAMILIES["baker_closed"](243))
    assert np.max(np.abs(np.abs(ev) - 1)) < 1e-10


def test_diagonal_spectrum_is_exact():
    assert list(spectrum(np.diag([0.2, 0.5]))) == [0.5, 0.2]


def test_power_norms_are_submultiplicative():
    M = baker_open(81).entries
    powers = [np.eye(81, dtype=complex)]
    for _ in range(8):
        powers.append(M @ powers[-1])
    norms = [np.linalg.norm(P, 2) for P in powers]
    for a in range(1, 5):
        for b in range(1, 5):
            assert norms[a + b] <= norms[a] * norms[b] * (1 + 1e-12)


def test_resolvent_scan_rejects_resonance_on_scan_point():
    with pytest.raises(SingularResolvent):
        resolvent_norm_scan(lambda N: TorusOperator(np.eye(N)), 1.0, 0.1, [8], [0])
