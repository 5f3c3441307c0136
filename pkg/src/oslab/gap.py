"""Power-norm scans, the Neumann resolvent identity, resolvent bounds and spectra."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
import scipy.linalg

from .errors import BadDimension, ConvergenceFailure, SingularPower, SingularResolvent
from .quant import SymbolGrid, TorusOperator, apply_damping, baker_closed, baker_open, dilation_model

__all__ = [
    "GapEntry",
    "GapReport",
    "ResolventEntry",
    "ResolventReport",
    "NeumannResult",
    "FAMILIES",
    "op_norm",
    "steps_for",
    "power_norm_scan",
    "neumann_resolvent",
    "resolvent_norm_scan",
    "spectrum",
    "power_decay_onset",
]

Family = Callable[[int], TorusOperator]

FAMILIES: dict[str, Family] = {
    "baker_open": baker_open,
    "baker_closed": baker_closed,
    "dilation": dilation_model,
    "zero": lambda N: TorusOperator(np.zeros((N, N))),
}


def _matrix(M) -> np.ndarray:
    return M.entries if isinstance(M, TorusOperator) else np.asarray(M)


def op_norm(M, tol: float = 1e-10, max_iter: int = 1000, seed: int = 0) -> float:
    """Largest singular value by power iteration on ``M* M``.

    The start vector comes from a fixed seed so results are reproducible.
    Falls back to a dense SVD when the iteration has not settled.
    """
    A = _matrix(M)
    if not np.any(A):
        return 0.0
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(A.shape[1]) + 1j * rng.standard_normal(A.shape[1])
    v /= np.linalg.norm(v)
    est = 0.0
    for _ in range(max_iter):
        w = A @ v
        new = float(np.linalg.norm(w))
        if new == 0.0:
            break
        v = A.conj().T @ w
        v /= np.linalg.norm(v)
        if abs(new - est) <= tol * new:
            return new
        est = new
    return float(scipy.linalg.svdvals(A)[0])


def steps_for(h: float, delta: float) -> int:
    """``N(h) = ceil(delta log(1/h))``."""
    return int(math.ceil(delta * math.log(1.0 / h)))


@dataclass(frozen=True)
class GapEntry:
    N: int
    h: float
    N_of_h: int
    power_norm: float
    amp_sup: float


@dataclass
class GapReport:
    delta: float
    entries: list[GapEntry]
    fitted_gamma: float

    columns = ("N", "h", "N_of_h", "power_norm", "amp_sup")

    def rows(self):
        return [(e.N, e.h, e.N_of_h, e.power_norm, e.amp_sup) for e in self.entries]


def _fit_gamma(entries: Sequence[GapEntry]) -> float:
    if any(e.power_norm == 0 for e in entries):
        return math.inf
    if len(entries) < 2:
        return math.nan
    log_h = np.log([e.h for e in entries])
    ratio = np.log([e.power_norm for e in entries]) - np.array([e.N_of_h * math.log(e.amp_sup) for e in entries])
    return float(np.polyfit(log_h, ratio, 1)[0])


def power_norm_scan(family: Family, delta: float, Ns: Sequence[int],
                    amp_sup: Callable[[TorusOperator], float] | None = None,
                    exact_norm: bool = False) -> GapReport:
    """``||M^{N(h)}||`` along a family and the fitted exponent gamma.

    gamma is the least-squares slope of ``log(||M^{N(h)}|| / amp^{N(h)})``
    against ``log h``.  ``amp_sup`` defaults to the operator norm of ``M``.
    """
    if not delta > 0:
        raise ValueError("delta must be positive")
    if not Ns:
        raise ValueError("Ns must be nonempty")
    norm = (lambda A: float(np.linalg.norm(A, 2))) if exact_norm else op_norm
    entries = []
    for N in Ns:
        M = family(N)
        n = steps_for(M.h, delta)
        power = np.eye(M.dim, dtype=complex)
        for _ in range(n):
            power = M.entries @ power
        amp = amp_sup(M) if amp_sup else norm(M.entries)
        entries.append(GapEntry(M.dim, M.h, n, norm(power), amp))
    return GapReport(delta, entries, _fit_gamma(entries))


@dataclass
class NeumannResult:
    R: np.ndarray
    residual: float
    cond_power: float


def neumann_resolvent(M, n: int, cond_limit: float = 1e12) -> NeumannResult:
    """``R = (I + M + ... + M^{n-1})(I - M^n)^{-1}`` and ``||(I - M) R - I||``."""
    A = _matrix(M)
    if n < 1:
        raise ValueError("n must be at least 1")
    eye = np.eye(A.shape[0], dtype=A.dtype)
    partial = np.zeros_like(eye)
    power = eye.copy()
    for _ in range(n):
        partial = partial + power
        power = power @ A
    gap = eye - power
    cond = float(np.linalg.cond(gap))
    if not cond < cond_limit:
        raise SingularPower(f"I - M^n is numerically singular (condition {cond:.2e})")
    # R G = S  <=>  G^T R^T = S^T
    R = scipy.linalg.solve(gap.T, partial.T).T
    residual = float(np.linalg.norm((eye - A) @ R - eye, 2))
    return NeumannResult(R, residual, cond)


@dataclass(frozen=True)
class ResolventEntry:
    N: int
    h: float
    z: complex
    norm: float
    bound: float
    A: float
    amp_sup: float
    hypothesis_ok: bool
    violation: bool


@dataclass
class ResolventReport:
    delta: float
    gamma: float
    h0: float | None
    entries: list[ResolventEntry] = field(default_factory=list)

    columns = ("N", "h", "re_z", "im_z", "norm", "bound", "hypothesis_ok")

    def rows(self):
        return [(e.N, e.h, e.z.real, e.z.imag, e.norm, e.bound, int(e.hypothesis_ok)) for e in self.entries]

    @property
    def violations(self) -> list[ResolventEntry]:
        return [e for e in self.entries if e.violation]


def resolvent_norm_scan(family: Family, delta: float, gamma: float, Ns: Sequence[int],
                        zs: Sequence[complex], tau0: float = 1.0, h0: float | None = None,
                        cond_limit: float = 1e12) -> ResolventReport:
    """Resolvent norms against the logarithmic bound.

    Scan points ``z`` are given in units of ``h``: the operator at ``z`` is
    ``M Op(exp(i (z h) tau0 / h)) = exp(i z tau0) M`` for the constant return
    time ``tau0``, so the amplitude scales by ``exp(-Im z tau0)``.
    """
    report = ResolventReport(delta, gamma, h0)
    threshold = math.exp(gamma / delta) if math.isfinite(gamma) else (math.inf if gamma > 0 else 0.0)
    for N in Ns:
        M = family(N)
        h = M.h
        base_amp = op_norm(M.entries)
        times = SymbolGrid.constant(tau0, M.dim)
        for z in zs:
            z = complex(z)
            Mz = apply_damping(M, z * h, times).entries
            amp = base_amp * math.exp(-z.imag * tau0)
            A = max(1.0, amp)
            lhs = np.eye(M.dim) - Mz
            cond = np.linalg.cond(lhs)
            if not cond < cond_limit:
                raise SingularResolvent(f"1 is an eigenvalue of M_z at N = {N}, z = {z}")
            norm = float(np.linalg.norm(np.linalg.inv(lhs), 2))
            log_h = abs(math.log(h))
            bound = 2 * delta * log_h * h ** (-delta * math.log(A))
            ok = amp < threshold
            checked = ok and (h0 is None or h <= h0)
            report.entries.append(ResolventEntry(M.dim, h, z, norm, bound, A, amp, ok, checked and norm > bound))
    return report


def spectrum(M, cap: int = 2187) -> np.ndarray:
    """Eigenvalues sorted by decreasing modulus."""
    A = _matrix(M)
    if A.shape[0] > cap:
        raise BadDimension(f"dimension {A.shape[0]} exceeds the spectrum cap {cap}")
    try:
        ev = scipy.linalg.eigvals(A)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise ConvergenceFailure(str(exc)) from None
    return ev[np.lexsort((ev.imag, ev.real, -np.abs(ev)))]


def power_decay_onset(M, Mg, n_max: int = 30, slack: float = 1e-10) -> int | None:
    """Smallest ``n0`` with ``||Mg^n|| <= ||M^n|| (1 + slack)`` for all ``n0 <= n <= n_max``."""
    A, B = _matrix(M), _matrix(Mg)
    pa = np.eye(A.shape[0], dtype=complex)
    pb = pa.copy()
    ok = []
    for _ in range(n_max):
        pa, pb = A @ pa, B @ pb
        ok.append(np.linalg.norm(pb, 2) <= np.linalg.norm(pa, 2) * (1 + slack))
    onset = None
    for n in range(n_max, 0, -1):
        if not ok[n - 1]:
            break
        onset = n
    return onset
