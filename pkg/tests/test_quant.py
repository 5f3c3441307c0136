import math

import numpy as np
import pytest
from scipy.optimize import linear_sum_assignment

from oslab.errors import BadDimension, DimensionMismatch
from oslab.quant import (
    EscapeWeight,
    SymbolGrid,
    TorusOperator,
    apply_damping,
    baker_classical,
    baker_closed,
    baker_inverse_classical,
    baker_open,
    conjugate_escape,
    dilation_classical,
    dilation_model,
    egorov_defect,
    escape_violations,
    load_operator,
    operator_to_csv,
    quantize_weyl,
    save_operator,
    smooth_bump,
)


def translation_oracle(p, q, N):
    """Weyl operator of exp(2 pi i (p x + q xi)) written out by hand."""
    out = np.zeros((N, N), dtype=complex)
    for m in range(N):
        out[m, (m + q) % N] = np.exp(2j * np.pi * p * (2 * m + q) / (2 * N))
    return out


@pytest.mark.parametrize("N", [7, 8, 15, 16])
@pytest.mark.parametrize("p, q", [(0, 0), (1, 0), (0, 1), (2, -1), (-3, 2), (1, 3)])
def test_weyl_matches_translation_oracle(N, p, q):
    a = SymbolGrid.from_function(lambda x, xi: np.exp(2j * np.pi * (p * x + q * xi)), N)
    assert np.allclose(quantize_weyl(a).entries, translation_oracle(p, q, N), atol=1e-12)


def test_weyl_of_real_symbol_is_hermitian():
    rng = np.random.default_rng(0)
    for N in (9, 10):
        op = quantize_weyl(SymbolGrid(rng.normal(size=(N, N)))).entries
        assert np.array_equal(op, op.conj().T)


def test_weyl_of_position_and_momentum_symbols():
    N = 12
    f = lambda x: np.cos(2 * np.pi * x) + 0.3 * np.sin(4 * np.pi * x)
    pos = quantize_weyl(SymbolGrid.from_function(lambda x, xi: f(x) + 0 * xi, N)).entries
    assert np.allclose(pos, np.diag(f(np.arange(N) / N)), atol=1e-12)
    mom = quantize_weyl(SymbolGrid.from_function(lambda x, xi: f(xi) + 0 * x, N)).entries
    assert np.allclose(np.sort(np.linalg.eigvalsh(mom)), np.sort(f(np.arange(N) / N)), atol=1e-12)
    assert np.allclose(quantize_weyl(SymbolGrid.constant(1.0, N)).entries, np.eye(N))


def test_weyl_norm_approaches_sup():
    a = lambda x, xi: np.cos(2 * np.pi * x) * np.cos(2 * np.pi * xi)
    gaps = [quantize_weyl(SymbolGrid.from_function(a, N)).norm() - 1.0 for N in (32, 128)]
    assert abs(gaps[1]) < abs(gaps[0])
    assert abs(gaps[1]) < 0.1


def test_dimension_mismatch():
    with pytest.raises(DimensionMismatch):
        quantize_weyl(SymbolGrid.constant(1.0, 8), N=9)
    with pytest.raises(BadDimension):
        SymbolGrid(np.ones((3, 4)))


@pytest.mark.parametrize("N", [3, 27, 81])
def test_closed_baker_is_unitary(N):
    B = baker_closed(N).entries
    assert np.allclose(B @ B.conj().T, np.eye(N), atol=1e-12)


@pytest.mark.parametrize("N", [27, 81, 243])
def test_closed_baker_determinant_has_unit_modulus(N):
    sign, _ = np.linalg.slogdet(baker_closed(N).entries)
    assert abs(abs(sign) - 1) < 1e-10
    _, logdet = np.linalg.slogdet(baker_closed(N).entries)
    assert abs(logdet) < 1e-10


@pytest.mark.parametrize("N", [27, 81, 243])
def test_open_baker_gram_is_a_projection(N):
    M = baker_open(N).entries
    P = M.conj().T @ M
    assert np.max(np.abs(P @ P - P)) < 1e-12
    assert np.max(np.abs(P - P.conj().T)) < 1e-12


def test_open_baker_rank_and_norm():
    B = baker_open(81)
    assert np.linalg.matrix_rank(B.entries) == 54
    assert abs(B.norm() - 1) < 1e-10
    assert B.spectral_radius() < 1


def test_baker_rejects_bad_dimension():
    with pytest.raises(BadDimension, match="N must be divisible by 3, got N = 28"):
        baker_open(28)


def test_baker_classical_inverse_and_area():
    rng = np.random.default_rng(2)
    x, xi = rng.random((2, 1000))
    y, eta = baker_inverse_classical(*baker_classical(x, xi))
    assert np.allclose(x, y) and np.allclose(xi, eta)
    # the differential is diag(1/3, 3) on every band
    d = 1e-7
    fx = (np.array(baker_classical(x + d, xi)) - np.array(baker_classical(x, xi))) / d
    assert np.allclose(fx[0], 1 / 3)


def test_closed_baker_egorov_away_from_discontinuities():
    # symbol supported inside the middle momentum band, away from its edges
    def a(x, xi):
        return smooth_bump(xi, 0.5, 0.12) * (1 + 0 * x)

    def aF(x, xi):
        return a(*baker_inverse_classical(x, xi))

    defects = []
    for N in (81, 243):
        U = baker_closed(N)
        defects.append(egorov_defect(U, SymbolGrid.from_function(aF, N), SymbolGrid.from_function(a, N)))
    assert defects[1] < defects[0]


def test_dilation_model_shapes():
    with pytest.raises(BadDimension):
        dilation_model(4)
    M = dilation_model(64)
    assert M.dim == 64
    assert M.norm() <= math.sqrt(2) + 1e-9
    x, xi = dilation_classical(0.4, 0.1)
    assert (x, xi) == (0.2, 0.2)


def test_damping_constant_return_time():
    M = baker_open(27)
    t = SymbolGrid.constant(1.0, 27)
    assert np.array_equal(apply_damping(M, 0, t).entries, M.entries)
    z = 0.3 + 0.2j
    damped = apply_damping(M, z * M.h, t)
    assert np.allclose(damped.entries, np.exp(1j * z) * M.entries)
    assert np.isclose(damped.norm(), M.norm() * np.exp(-0.2))
    with pytest.raises(ValueError):
        apply_damping(M, 0.1, SymbolGrid.constant(-1.0, 27))


def test_damping_variable_return_time_commutes_with_scalar_case():
    N = 27
    M = baker_open(N)
    t = SymbolGrid.from_function(lambda x, xi: 1.0 + 0 * x, N)
    t.values = t.values + 1e-3 * np.cos(2 * np.pi * np.arange(N) / N)[:, None]
    z = 0.2j * M.h
    full = apply_damping(M, z, t).entries
    approx = np.exp(1j * z * 1.0 / M.h) * M.entries
    assert np.linalg.norm(full - approx, 2) < 1e-2


def test_escape_conjugation_is_a_similarity():
    N = 27
    M = baker_open(N)
    g0 = SymbolGrid.from_function(lambda x, xi: np.sin(np.pi * x) ** 2, N)
    conj = conjugate_escape(M, EscapeWeight(g0, 0.5))
    assert np.allclose(np.sort_complex(np.round(conj.operator.eigenvalues(), 8)),
                       np.sort_complex(np.round(M.eigenvalues(), 8)))
    assert conj.norm_D * conj.norm_D_inv <= conj.bound * 1.5
    with pytest.raises(ValueError):
        EscapeWeight(g0, 0.0)


def test_escape_conjugation_preserves_eigenvalues_at_243():
    N = 243
    M = baker_open(N)
    g0 = SymbolGrid.from_function(lambda x, xi: np.sin(np.pi * x) ** 2 * np.cos(np.pi * xi) ** 2, N)
    conj = conjugate_escape(M, EscapeWeight(g0, 0.25))
    a, b = M.eigenvalues(), conj.operator.eigenvalues()
    rows, cols = linear_sum_assignment(np.abs(a[:, None] - b[None, :]))
    err = np.abs(a[rows] - b[cols])
    # the zero eigenvalue is defective, so roundoff moves it like eps^(1/k)
    nonzero = np.abs(a[rows]) > 1e-3
    assert np.max(err[nonzero]) < 1e-8
    assert np.max(err[~nonzero]) < 1e-5


def test_escape_violations_counts():
    g0 = lambda x, xi: x
    F = lambda x, xi: (x + 0.5, xi)
    res = escape_violations(g0, F, lambda x, xi: x < 0.2, lambda x, xi: x < 0.5, samples=100)
    assert res["checked"] == 5000
    assert res["nonincreasing"] == 0
    assert res["below_one"] == 3000


def test_operator_binary_roundtrip(tmp_path):
    op = baker_open(27)
    path = tmp_path / "op.bin"
    save_operator(op, path)
    data = path.read_bytes()
    assert data[:8] == b"OSLBOP01"
    assert len(data) == 8 + 24 + 16 * 27 * 27
    again = load_operator(path)
    assert np.array_equal(again.entries, op.entries)


def test_operator_csv():
    text = operator_to_csv(TorusOperator(np.array([[1, 2j], [0.5, -1]])))
    lines = text.splitlines()
    assert lines[0] == "row,col,re,im"
    assert lines[2] == "0,1,0.0,2.0"
    with pytest.raises(BadDimension):
        operator_to_csv(baker_open(300), max_dim=256)
