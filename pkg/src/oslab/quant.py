"""Finite-dimensional torus quantization and open quantum maps.

Conventions: Hilbert space C^N with position grid ``x_k = k/N`` on the unit
circle, Planck constant ``h = 1/(2 pi N)``.  Symbols are sampled on the
``N x N`` lattice ``(k/N, l/N)`` and are periodic in both variables.
"""

from __future__ import annotations

import io
import math
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np
from scipy.linalg import block_diag

from .errors import BadDimension, DimensionMismatch, Singular

__all__ = [
    "TorusOperator",
    "SymbolGrid",
    "EscapeWeight",
    "ConjugatedOperator",
    "quantize_weyl",
    "dft_matrix",
    "baker_closed",
    "baker_open",
    "baker_classical",
    "baker_inverse_classical",
    "dilation_model",
    "dilation_classical",
    "apply_damping",
    "conjugate_escape",
    "escape_violations",
    "egorov_defect",
    "smooth_bump",
    "save_operator",
    "load_operator",
    "operator_to_csv",
]

_MAGIC = b"OSLBOP01"


@dataclass
class TorusOperator:
    entries: np.ndarray

    def __post_init__(self):
        self.entries = np.asarray(self.entries, dtype=complex)
        if self.entries.ndim != 2 or self.entries.shape[0] != self.entries.shape[1] or self.entries.shape[0] < 1:
            raise BadDimension(f"operator must be a nonempty square matrix, got shape {self.entries.shape}")

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    @property
    def h(self) -> float:
        return 1.0 / (2.0 * math.pi * self.dim)

    def __matmul__(self, other: "TorusOperator") -> "TorusOperator":
        _match(self.dim, other.dim)
        return TorusOperator(self.entries @ other.entries)

    def norm(self) -> float:
        return float(np.linalg.norm(self.entries, 2))

    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvals(self.entries)

    def spectral_radius(self) -> float:
        return float(np.max(np.abs(self.eigenvalues())))


@dataclass
class SymbolGrid:
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values)
        if self.values.ndim != 2 or self.values.shape[0] != self.values.shape[1]:
            raise BadDimension(f"symbol samples must form an N x N array, got {self.values.shape}")

    @property
    def dim(self) -> int:
        return self.values.shape[0]

    @classmethod
    def from_function(cls, f: Callable[[np.ndarray, np.ndarray], np.ndarray], N: int) -> "SymbolGrid":
        grid = np.arange(N) / N
        x, xi = np.meshgrid(grid, grid, indexing="ij")
        return cls(np.asarray(f(x, xi)) * np.ones((N, N)))

    @classmethod
    def constant(cls, c, N: int) -> "SymbolGrid":
        return cls(np.full((N, N), c))

    def compose(self, f: Callable, F: Callable) -> "SymbolGrid":
        """Samples of ``f o F`` on this grid's lattice."""
        grid = np.arange(self.dim) / self.dim
        x, xi = np.meshgrid(grid, grid, indexing="ij")
        return SymbolGrid(f(*F(x, xi)))

    def sup(self) -> float:
        return float(np.max(np.abs(self.values)))


@dataclass
class EscapeWeight:
    g0: SymbolGrid
    T: float

    def __post_init__(self):
        if not self.T > 0:
            raise ValueError("escape strength T must be positive")
        if np.iscomplexobj(self.g0.values) or np.min(self.g0.values) < 0:
            raise ValueError("g0 must be real and nonnegative")

    @property
    def C0(self) -> float:
        return float(np.max(self.g0.values))


@dataclass
class ConjugatedOperator:
    operator: TorusOperator
    norm_D: float
    norm_D_inv: float
    bound: float


def _match(n1: int, n2: int):
    if n1 != n2:
        raise DimensionMismatch(f"dimensions differ: {n1} vs {n2}")


def _interp_half(values: np.ndarray) -> np.ndarray:
    """Trigonometric interpolation along axis 0 from the N-grid to the 2N-grid."""
    N = values.shape[0]
    coef = np.fft.fft(values, axis=0)
    pad = np.zeros((2 * N,) + values.shape[1:], dtype=complex)
    half = N // 2
    if N % 2 == 0:
        pad[:half] = coef[:half]
        pad[N + half + 1:] = coef[half + 1:]
        # split the Nyquist mode symmetrically to keep real data real
        pad[half] = coef[half] / 2
        pad[N + half] = coef[half] / 2
    else:
        pad[:half + 1] = coef[:half + 1]
        pad[N + half + 1:] = coef[half + 1:]
    return np.fft.ifft(pad, axis=0) * 2


def quantize_weyl(a: SymbolGrid, N: int | None = None) -> TorusOperator:
    """Weyl quantization on the discrete torus.

    ``Op(a)[m, n] = (1/N) sum_l a(midpoint, l/N) exp(2 pi i l (m - n) / N)``
    where the midpoint of ``x_m`` and ``x_n`` is taken along the shorter arc
    and read off the symbol's trigonometric interpolant on the doubled grid.
    Real symbols give exactly Hermitian matrices.
    """
    if N is not None:
        _match(N, a.dim)
    N = a.dim
    kernel = np.fft.ifft(_interp_half(a.values), axis=1)
    m = np.arange(N)
    d = (m[:, None] - m[None, :] + N // 2) % N - N // 2
    col = d % N
    mid = (2 * m[None, :] + d) % (2 * N)
    out = kernel[mid, col]
    if N % 2 == 0:
        # offset N/2 is equally far both ways round; average the two midpoints
        tie = d == -(N // 2)
        mid2 = np.broadcast_to((2 * m[None, :] + N // 2) % (2 * N), out.shape)
        out = np.where(tie, 0.5 * (out + kernel[mid2, col]), out)
    if not np.iscomplexobj(a.values):
        out = 0.5 * (out + out.conj().T)
    return TorusOperator(out)


# ---------------------------------------------------------------------------
# baker maps

def dft_matrix(n: int) -> np.ndarray:
    k = np.arange(n)
    return np.exp(-2j * np.pi * np.outer(k, k) / n) / math.sqrt(n)


def _check_baker_dim(N: int):
    if N < 3 or N % 3:
        raise BadDimension(f"N must be divisible by 3, got N = {N}")


def baker_closed(N: int) -> TorusOperator:
    """Unitary triadic baker quantizing :func:`baker_classical`.

    Built as the adjoint of ``F_N^{-1} blockdiag(F_{N/3}, F_{N/3}, F_{N/3})``
    so that momentum bands are carried onto position bands.
    """
    _check_baker_dim(N)
    fn = dft_matrix(N)
    blocks = block_diag(*[dft_matrix(N // 3)] * 3)
    return TorusOperator((fn.conj().T @ blocks).conj().T)


def baker_open(N: int) -> TorusOperator:
    """Closed baker followed by the projection killing ``x`` in [1/3, 2/3)."""
    closed = baker_closed(N).entries
    keep = np.ones(N)
    keep[N // 3: 2 * N // 3] = 0.0
    return TorusOperator(keep[:, None] * closed)


def baker_classical(x, xi):
    """Area-preserving map sending momentum band ``b`` onto position band ``b``."""
    x, xi = np.asarray(x, dtype=float), np.asarray(xi, dtype=float)
    band = np.floor(3 * xi)
    return (x + band) / 3, 3 * xi - band


def baker_inverse_classical(x, xi):
    x, xi = np.asarray(x, dtype=float), np.asarray(xi, dtype=float)
    band = np.floor(3 * x)
    return 3 * x - band, (xi + band) / 3


# ---------------------------------------------------------------------------
# dilation model with a single hyperbolic fixed point

def smooth_bump(u, center: float = 0.0, width: float = 1.0):
    """``exp(-1/(1-z^2))`` for ``|z| < 1`` with ``z = (u - center)/width``, else 0."""
    z = (np.asarray(u, dtype=float) - center) / width
    out = np.zeros_like(z)
    inside = np.abs(z) < 1
    out[inside] = np.exp(-1.0 / (1.0 - z[inside] ** 2))
    return out


def _plateau(u, edge: float, cutoff: float):
    """Smooth cutoff equal to 1 for |u| <= cutoff*edge and 0 for |u| >= edge."""
    u = np.abs(np.asarray(u, dtype=float))
    lo = cutoff * edge
    t = np.clip((u - lo) / (edge - lo), 0.0, 1.0)

    def f(v):
        return np.where(v > 0, np.exp(-1.0 / np.where(v > 0, v, 1.0)), 0.0)

    return f(1 - t) / (f(1 - t) + f(t))


def _centered(u):
    return (np.asarray(u) + 0.5) % 1.0 - 0.5


def dilation_classical(x, xi):
    """The model map ``(x, xi) -> (x/2, 2 xi)`` on ]-1,1[ x ]-1/2,1/2[."""
    return np.asarray(x) / 2, 2 * np.asarray(xi)


def dilation_model(N: int, cutoff: float = 0.8) -> TorusOperator:
    """Approximate quantization of :func:`dilation_classical`.

    The departure rectangle is scaled by 1/2 onto the centred torus
    ``[-1/2, 1/2)^2``.  A state is cut off to ``|xi| < 1/4`` in momentum,
    compressed by ``psi(x) -> sqrt(2) psi(2x)`` (exact on the grid since
    ``2 x_j`` is again a grid point) and cut off to ``|2x| < 1/2``.  The
    cutoffs are smooth and equal 1 on the inner ``cutoff`` fraction, so the
    result is only approximately unitary on the allowed region.
    """
    if N < 8:
        raise BadDimension(f"dilation model needs N >= 8, got N = {N}")
    if not 0 < cutoff < 1:
        raise ValueError("cutoff must lie in (0, 1)")
    grid = _centered(np.arange(N) / N)
    chi_xi = SymbolGrid.from_function(lambda x, xi: _plateau(_centered(xi), 0.25, cutoff) + 0 * x, N)
    band = quantize_weyl(chi_xi).entries
    j = np.arange(N)
    squeeze = np.zeros((N, N))
    squeeze[j, (2 * j) % N] = 1.0
    window = _plateau(2 * grid, 0.5, cutoff)
    return TorusOperator(math.sqrt(2.0) * window[:, None] * (squeeze @ band))


# ---------------------------------------------------------------------------
# damping, escape conjugation, Egorov

def apply_damping(M: TorusOperator, z: complex, t: SymbolGrid) -> TorusOperator:
    """``M Op(exp(i z t / h))`` for return-time samples ``t``."""
    _match(M.dim, t.dim)
    if np.iscomplexobj(t.values) or np.any(t.values <= 0):
        raise ValueError("return times must be real and positive")
    if z == 0:
        return TorusOperator(M.entries.copy())
    weight = SymbolGrid(np.exp(1j * z * t.values / M.h))
    if np.ptp(t.values) == 0:
        # constant return time: the symbol is a scalar
        return TorusOperator(weight.values[0, 0] * M.entries)
    return TorusOperator(M.entries @ quantize_weyl(weight).entries)


def conjugate_escape(M: TorusOperator, w: EscapeWeight) -> ConjugatedOperator:
    """``D^{-1} M D`` with ``D = exp(Op(g))``, ``g = T log(1/h) g0``."""
    _match(M.dim, w.g0.dim)
    h = M.h
    g = SymbolGrid(w.T * math.log(1.0 / h) * np.asarray(w.g0.values, dtype=float))
    evals, evecs = np.linalg.eigh(quantize_weyl(g).entries)
    D = (evecs * np.exp(evals)) @ evecs.conj().T
    D_inv = (evecs * np.exp(-evals)) @ evecs.conj().T
    conj = D_inv @ M.entries @ D
    return ConjugatedOperator(
        TorusOperator(conj),
        norm_D=float(np.exp(evals.max())),
        norm_D_inv=float(np.exp(-evals.min())),
        bound=h ** (-w.T * w.C0),
    )


def escape_violations(g0: Callable, F: Callable, in_W2: Callable, in_W3: Callable,
                      samples: int = 200) -> dict:
    """Sampled check of the escape-function inequalities.

    On a ``samples x samples`` lattice counts points of ``W3`` where
    ``g0(F(p)) - g0(p) < 0`` and points of ``W3 \\ W2`` where it is ``< 1``.
    """
    grid = (np.arange(samples) + 0.5) / samples
    x, xi = np.meshgrid(grid, grid, indexing="ij")
    diff = g0(*F(x, xi)) - g0(x, xi)
    w3 = in_W3(x, xi)
    w2 = in_W2(x, xi)
    return {
        "checked": int(w3.sum()),
        "nonincreasing": int(np.sum(w3 & (diff < 0))),
        "below_one": int(np.sum(w3 & ~w2 & (diff < 1))),
    }


def egorov_defect(U: TorusOperator, a: SymbolGrid, aF: SymbolGrid, cond_limit: float = 1e12) -> float:
    """``||U^{-1} Op(a) U - Op(a o F)||``."""
    _match(U.dim, a.dim)
    _match(U.dim, aF.dim)
    if np.linalg.cond(U.entries) > cond_limit:
        raise Singular("U is not invertible to working precision")
    conj = np.linalg.solve(U.entries, quantize_weyl(a).entries @ U.entries)
    return float(np.linalg.norm(conj - quantize_weyl(aF).entries, 2))


# ---------------------------------------------------------------------------
# export

def save_operator(op: TorusOperator, path) -> None:
    """Binary container: magic, uint64 rows, uint64 cols, float64 h, then
    row-major entries as interleaved (re, im) float64, all little-endian."""
    rows, cols = op.entries.shape
    buf = io.BytesIO()
    buf.write(_MAGIC)
    buf.write(struct.pack("<QQd", rows, cols, op.h))
    buf.write(np.ascontiguousarray(op.entries, dtype="<c16").tobytes())
    Path(path).write_bytes(buf.getvalue())


def load_operator(path) -> TorusOperator:
    data = Path(path).read_bytes()
    if data[:8] != _MAGIC:
        raise ValueError("not an operator container")
    rows, cols, _ = struct.unpack("<QQd", data[8:32])
    entries = np.frombuffer(data[32:], dtype="<c16")
    if entries.size != rows * cols:
        raise ValueError("truncated operator container")
    return TorusOperator(entries.reshape(rows, cols).astype(complex))


def operator_to_csv(op: TorusOperator, max_dim: int = 256) -> str:
    """Rows ``row,col,re,im``; refused above ``max_dim``."""
    if op.dim > max_dim:
        raise BadDimension(f"CSV export limited to N <= {max_dim}")
    lines = ["row,col,re,im"]
    for r in range(op.dim):
        for c in range(op.dim):
            v = op.entries[r, c]
            lines.append(f"{r},{c},{float(v.real)!r},{float(v.imag)!r}")
    return "\n".join(lines) + "\n"
