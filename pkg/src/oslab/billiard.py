"""Open billiard map, shadow map, periodic orbits and trapped-set covers.

Phase-space coordinates on obstacle ``j`` are ``(s, eta)``: counter-clockwise
arclength and the tangential component of the unit outgoing direction.  In
these coordinates the billiard map preserves ``ds ^ deta``.

The vectorised kernel :func:`advance` works on arrays; the scalar helpers
(:func:`step`, :func:`flight_time`, :func:`jacobian`, ...) wrap it and raise
the documented errors.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import Glancing, InvalidConfig, InvalidWord, NearGlancing, NoConvergence, NoHit
from .geometry import ObstacleConfig, check_no_eclipse

__all__ = [
    "BoundaryPhasePoint",
    "StepKind",
    "BilliardStep",
    "PeriodicOrbit",
    "TrappedSetCover",
    "lift",
    "advance",
    "step",
    "flight_time",
    "jacobian",
    "jacobian_analytic",
    "inverse_step",
    "find_periodic_orbit",
    "trapped_set_cover",
    "box_counting_dimension",
    "lyapunov_estimate",
    "GLANCING_TOL",
]

GLANCING_TOL = 1e-12

# status codes returned by advance()
ESCAPE, HIT, GLANCE = 0, 1, -1


@dataclass(frozen=True)
class BoundaryPhasePoint:
    obstacle: int
    s: float
    eta: float

    def __post_init__(self):
        if abs(self.eta) > 1:
            raise ValueError(f"|eta| must be <= 1, got {self.eta}")

    def reversed(self) -> "BoundaryPhasePoint":
        return BoundaryPhasePoint(self.obstacle, self.s, -self.eta)


class StepKind(enum.Enum):
    HIT_PLUS = "HitPlus"
    HIT_MINUS = "HitMinus"
    ESCAPE = "Escape"


@dataclass(frozen=True)
class BilliardStep:
    kind: StepKind
    target: int | None = None
    arrival: BoundaryPhasePoint | None = None
    time: float | None = None
    # shadow branch only: the continued ray meets a further obstacle
    occluded: bool = False


@dataclass
class PeriodicOrbit:
    word: tuple[int, ...]
    points: list[BoundaryPhasePoint]
    length: float
    monodromy: np.ndarray
    reflection_residual: float = 0.0
    iterations: int = 0

    @property
    def period(self) -> int:
        return len(self.word)

    @property
    def multipliers(self) -> np.ndarray:
        ev = np.linalg.eigvals(self.monodromy)
        return ev[np.argsort(-np.abs(ev))]

    @property
    def mu(self) -> float:
        """Largest monodromy eigenvalue (real for hyperbolic orbits)."""
        return float(np.real(self.multipliers[0]))

    @property
    def lyapunov(self) -> float:
        return math.log(abs(self.mu)) / self.period


@dataclass
class TrappedSetCover:
    depth: int
    # per obstacle: array of shape (m, 4) with rows (s_lo, s_hi, eta_lo, eta_hi)
    boxes: list[np.ndarray]
    total_area: float
    history: list[tuple[int, int, float]] = field(default_factory=list)

    @property
    def box_count(self) -> int:
        return int(sum(len(b) for b in self.boxes))


def _frame(config: ObstacleConfig, j, s):
    j = np.asarray(j)
    centers, radii = config.centers, config.radii
    r = radii[j]
    theta = np.asarray(s, dtype=float) / r
    normal = np.stack([np.cos(theta), np.sin(theta)], axis=-1)
    tangent = np.stack([-normal[..., 1], normal[..., 0]], axis=-1)
    point = centers[j] + r[..., None] * normal
    return point, tangent, normal


def lift(config: ObstacleConfig, rho: BoundaryPhasePoint):
    """Point and outgoing unit direction for ``rho``."""
    if abs(rho.eta) >= 1:
        raise Glancing(f"glancing direction, |eta| = {abs(rho.eta)}")
    point, tangent, normal = _frame(config, rho.obstacle, rho.s)
    direction = rho.eta * tangent + math.sqrt(1.0 - rho.eta**2) * normal
    return point, direction


def advance(config: ObstacleConfig, j, s, eta, branch: str = "plus", glancing_tol: float = GLANCING_TOL):
    """Vectorised billiard (``branch='plus'``) or shadow (``'minus'``) step.

    Returns ``(target, s_new, eta_new, t, status)``; status is ``HIT``,
    ``ESCAPE`` or ``GLANCE``.  Entries for non-hits hold ``-1`` / ``nan``.
    """
    j = np.atleast_1d(np.asarray(j, dtype=int))
    s = np.atleast_1d(np.asarray(s, dtype=float))
    eta = np.atleast_1d(np.asarray(eta, dtype=float))
    j, s, eta = np.broadcast_arrays(j, s, eta)
    shape = j.shape
    j, s, eta = j.ravel(), s.ravel(), eta.ravel()

    centers, radii = config.centers, config.radii
    point, tangent, normal = _frame(config, j, s)
    valid = np.abs(eta) < 1
    root = np.sqrt(np.clip(1.0 - eta**2, 0.0, None))
    xi = eta[:, None] * tangent + root[:, None] * normal

    n = len(j)
    best_t = np.full(n, np.inf)
    best_i = np.full(n, -1)
    best_exit = np.full(n, np.nan)
    glance_t = np.full(n, np.inf)
    for i in range(len(config)):
        q = point - centers[i]
        b = np.einsum("ij,ij->i", q, xi)
        c = np.einsum("ij,ij->i", q, q) - radii[i] ** 2
        disc = (b * b - c) / radii[i] ** 2
        ahead = (b < 0) & (j != i)
        grazing = ahead & (np.abs(disc) < glancing_tol)
        glance_t = np.where(grazing, np.minimum(glance_t, -b), glance_t)
        hit = ahead & (disc >= glancing_tol)
        sq = radii[i] * np.sqrt(np.where(hit, disc, 0.0))
        t_in = -b - sq
        closer = hit & (t_in < best_t)
        best_t = np.where(closer, t_in, best_t)
        best_exit = np.where(closer, -b + sq, best_exit)
        best_i = np.where(closer, i, best_i)

    status = np.where(best_i >= 0, HIT, ESCAPE)
    status = np.where(glance_t < best_t, GLANCE, status)
    status = np.where(valid, status, GLANCE)
    hit = status == HIT

    t = np.where(hit, best_t if branch == "plus" else best_exit, np.nan)
    target = np.where(hit, best_i, -1)
    safe_i = np.where(hit, best_i, 0)
    arrival = point + np.where(hit, t, 0.0)[:, None] * xi
    nu = (arrival - centers[safe_i]) / radii[safe_i][:, None]
    theta = np.mod(np.arctan2(nu[:, 1], nu[:, 0]), 2 * np.pi)
    s_new = np.where(hit, radii[safe_i] * theta, np.nan)
    tan_new = np.stack([-nu[:, 1], nu[:, 0]], axis=-1)
    eta_new = np.where(hit, np.einsum("ij,ij->i", xi, tan_new), np.nan)
    return (target.reshape(shape), s_new.reshape(shape), eta_new.reshape(shape),
            t.reshape(shape), status.reshape(shape))


def step(config: ObstacleConfig, rho: BoundaryPhasePoint, branch: str = "plus",
         glancing_tol: float = GLANCING_TOL) -> BilliardStep:
    if branch not in ("plus", "minus"):
        raise ValueError(f"branch must be 'plus' or 'minus', got {branch!r}")
    if abs(rho.eta) >= 1:
        raise Glancing(f"glancing direction, |eta| = {abs(rho.eta)}")
    target, s1, eta1, t, status = advance(config, rho.obstacle, rho.s, rho.eta, branch, glancing_tol)
    status = int(status[0])
    if status == GLANCE:
        raise Glancing("ray is tangent to an obstacle within tolerance")
    if status == ESCAPE:
        return BilliardStep(StepKind.ESCAPE)
    i = int(target[0])
    arrival = BoundaryPhasePoint(i, float(s1[0]), float(np.clip(eta1[0], -1.0, 1.0)))
    occluded = False
    kind = StepKind.HIT_PLUS
    if branch == "minus":
        kind = StepKind.HIT_MINUS
        # the straight continuation from the exit point
        _, _, _, _, after = advance(config, i, arrival.s, arrival.eta, "plus", glancing_tol)
        occluded = bool(after[0] != ESCAPE)
    return BilliardStep(kind, i, arrival, float(t[0]), occluded)


def inverse_step(config: ObstacleConfig, rho: BoundaryPhasePoint) -> BilliardStep:
    """Preimage under the billiard map, by time reversal."""
    result = step(config, rho.reversed(), "plus")
    if result.kind is StepKind.ESCAPE:
        return result
    return BilliardStep(result.kind, result.target, result.arrival.reversed(), result.time)


def flight_time(config: ObstacleConfig, rho: BoundaryPhasePoint) -> float:
    result = step(config, rho, "plus")
    if result.kind is StepKind.ESCAPE:
        raise NoHit("ray escapes to infinity")
    return result.time


def _wrap(ds, period):
    return (ds + 0.5 * period) % period - 0.5 * period


def jacobian(config: ObstacleConfig, rho: BoundaryPhasePoint, method: str = "fd",
             rel_step: float = 3e-4, analytic_check: float | None = None) -> np.ndarray:
    """d(s', eta')/d(s, eta) of the billiard map.

    ``method='fd'`` uses central differences at steps ``h, h/2, h/4`` combined
    by two rounds of Richardson extrapolation.  The arclength step scales with
    the radius; both steps shrink with the cosines of the departure and
    arrival angles so the stencil stays clear of glancing rays.
    ``method='analytic'`` returns :func:`jacobian_analytic`.

    With ``analytic_check`` set, a finite-difference result whose entrywise
    distance to the disc formula exceeds it raises ``NearGlancing``.
    """
    if method == "analytic":
        return jacobian_analytic(config, rho)
    if method != "fd":
        raise ValueError(f"unknown method {method!r}")
    first = step(config, rho, "plus")
    if first.kind is StepKind.ESCAPE:
        raise NoHit("ray escapes to infinity")
    target = first.target
    perim = config.perimeters[target]
    cos_in = math.sqrt(1.0 - rho.eta**2)
    cos_out = math.sqrt(max(0.0, 1.0 - first.arrival.eta**2))
    steps = (rel_step * config.radii[rho.obstacle] * cos_out, rel_step * cos_in * cos_out)
    if min(steps) <= 0:
        raise NearGlancing("no room for a difference stencil")
    jac = np.empty((2, 2))
    for col, h in enumerate(steps):
        hh = h / np.array([1.0, 2.0, 4.0])
        offsets = np.concatenate([hh, -hh])
        s_pts = rho.s + (offsets if col == 0 else 0.0)
        e_pts = rho.eta + (offsets if col == 1 else 0.0)
        if np.any(np.abs(e_pts) >= 1):
            raise NearGlancing("difference stencil leaves |eta| < 1")
        tgt, s1, e1, _, status = advance(config, np.full(6, rho.obstacle), s_pts, e_pts, "plus")
        if np.any(status != HIT) or np.any(tgt != target):
            raise NearGlancing("difference stencil leaves the domain of the map")
        for row, vals in enumerate((_wrap(s1 - first.arrival.s, perim), e1 - first.arrival.eta)):
            d = (vals[:3] - vals[3:]) / (2 * hh)
            r1 = (4 * d[1:] - d[:-1]) / 3
            jac[row, col] = (16 * r1[1] - r1[0]) / 15
    if analytic_check is not None:
        exact = jacobian_analytic(config, rho)
        if np.max(np.abs(exact - jac)) > analytic_check:
            raise NearGlancing("finite-difference Jacobian disagrees with the disc formula")
    return jac


def jacobian_analytic(config: ObstacleConfig, rho: BoundaryPhasePoint) -> np.ndarray:
    """Closed-form derivative of the billiard map between discs.

    Obtained by differentiating ``q = p + t xi`` subject to ``|q - c_i| = r_i``.
    """
    first = step(config, rho, "plus")
    if first.kind is StepKind.ESCAPE:
        raise NoHit("ray escapes to infinity")
    j, i = rho.obstacle, first.target
    rj, ri = config.radii[j], config.radii[i]
    ci = config.centers[i]
    point, tangent, normal = _frame(config, j, rho.s)
    root = math.sqrt(1.0 - rho.eta**2)
    xi = rho.eta * tangent + root * normal
    t = first.time
    q = point + t * xi
    nu = (q - ci) / ri
    tan_i = np.array([-nu[1], nu[0]])

    # columns: derivative with respect to s, then eta
    dp = [tangent, np.zeros(2)]
    dxi = [(-rho.eta * normal + root * tangent) / rj, tangent - (rho.eta / root) * normal]
    jac = np.empty((2, 2))
    for col in range(2):
        dt = -np.dot(nu, dp[col] + t * dxi[col]) / np.dot(nu, xi)
        dq = dp[col] + t * dxi[col] + dt * xi
        ds_new = np.dot(dq, tan_i)
        dtheta = ds_new / ri
        deta_new = np.dot(dxi[col], tan_i) - np.dot(xi, nu) * dtheta
        jac[:, col] = ds_new, deta_new
    return jac


# ---------------------------------------------------------------------------
# periodic orbits

def _validate_word(word: Sequence[int], count: int) -> tuple[int, ...]:
    word = tuple(int(w) for w in word)
    if len(word) < 2:
        raise InvalidWord("word must have length >= 2")
    if any(w < 0 or w >= count for w in word):
        raise InvalidWord(f"letters must lie in 0..{count - 1}")
    for a, b in zip(word, word[1:] + word[:1]):
        if a == b:
            raise InvalidWord(f"adjacent repeat of letter {a} in {word}")
    return word


def _orbit_points(centers, radii, word, theta):
    c = centers[list(word)]
    r = radii[list(word)]
    return c + r[:, None] * np.stack([np.cos(theta), np.sin(theta)], axis=1)


def _length_derivatives(centers, radii, word, theta):
    """Total length, gradient and Hessian of the closed broken path."""
    n = len(word)
    r = radii[list(word)]
    pts = _orbit_points(centers, radii, word, theta)
    dpts = r[:, None] * np.stack([-np.sin(theta), np.cos(theta)], axis=1)
    ddpts = -r[:, None] * np.stack([np.cos(theta), np.sin(theta)], axis=1)
    total = 0.0
    grad = np.zeros(n)
    hess = np.zeros((n, n))
    for k in range(n):
        m = (k + 1) % n
        d = pts[m] - pts[k]
        ell = float(np.hypot(*d))
        u = d / ell
        total += ell
        proj = np.eye(2) - np.outer(u, u)
        # dell/dtheta_m = u . P'_m ; dell/dtheta_k = -u . P'_k
        gm, gk = u @ dpts[m], -u @ dpts[k]
        grad[m] += gm
        grad[k] += gk
        hess[m, m] += (dpts[m] @ proj @ dpts[m]) / ell + u @ ddpts[m]
        hess[k, k] += (dpts[k] @ proj @ dpts[k]) / ell - u @ ddpts[k]
        cross = -(dpts[m] @ proj @ dpts[k]) / ell
        hess[m, k] += cross
        hess[k, m] += cross
    return total, grad, hess


def _initial_angles(centers, radii, word, grid: int = 16, sweeps: int = 3):
    n = len(word)
    theta = np.empty(n)
    for k in range(n):
        c = centers[word[k]]
        a = centers[word[k - 1]] - c
        b = centers[word[(k + 1) % n]] - c
        bis = a / np.linalg.norm(a) + b / np.linalg.norm(b)
        if np.linalg.norm(bis) < 1e-12:
            bis = np.array([-a[1], a[0]])
        theta[k] = math.atan2(bis[1], bis[0])
    # coordinate-wise grid search in a window around the bisector guess
    window = np.linspace(-np.pi / 2, np.pi / 2, grid)
    for _ in range(sweeps):
        for k in range(n):
            trial = np.repeat(theta[None, :], grid, axis=0)
            trial[:, k] = theta[k] + window
            lengths = [_length_derivatives(centers, radii, word, row)[0] for row in trial]
            theta = trial[int(np.argmin(lengths))]
        window = window / 4
    return theta


def find_periodic_orbit(config: ObstacleConfig, word: Sequence[int], max_iter: int = 100,
                        tol: float = 1e-13, residual_tol: float = 1e-10,
                        require_no_eclipse: bool = True) -> PeriodicOrbit:
    """Periodic billiard orbit with itinerary ``word`` (0-based obstacle indices).

    The closed broken-path length is minimised over one boundary angle per
    letter by damped Newton steps from a grid-search start.  The reflection law
    is checked afterwards.
    """
    word = _validate_word(word, len(config))
    if require_no_eclipse and not check_no_eclipse(config):
        raise InvalidConfig("configuration violates the no-eclipse condition")
    centers, radii = config.centers, config.radii
    theta = _initial_angles(centers, radii, word)
    iterations = 0
    for iterations in range(1, max_iter + 1):
        total, grad, hess = _length_derivatives(centers, radii, word, theta)
        if np.max(np.abs(grad)) < tol:
            break
        try:
            eigmin = np.linalg.eigvalsh(hess)[0]
        except np.linalg.LinAlgError as exc:
            raise NoConvergence(str(exc)) from None
        shift = 0.0 if eigmin > 1e-10 else 1e-8 - eigmin
        delta = -np.linalg.solve(hess + shift * np.eye(len(word)), grad)
        alpha = 1.0
        while alpha > 1e-12:
            cand = theta + alpha * delta
            if _length_derivatives(centers, radii, word, cand)[0] <= total + 1e-15 * max(1.0, total):
                break
            alpha /= 2
        theta = theta + alpha * delta
    else:
        raise NoConvergence(f"no convergence after {max_iter} Newton iterations")

    pts = _orbit_points(centers, radii, word, theta)
    n = len(word)
    residual = 0.0
    points = []
    for k in range(n):
        u_in = pts[k] - pts[k - 1]
        u_out = pts[(k + 1) % n] - pts[k]
        u_in /= np.linalg.norm(u_in)
        u_out /= np.linalg.norm(u_out)
        nu = np.array([math.cos(theta[k]), math.sin(theta[k])])
        reflected = u_in - 2 * np.dot(u_in, nu) * nu
        residual = max(residual, float(np.linalg.norm(reflected - u_out)))
        if np.dot(u_out, nu) <= 0:
            raise NoConvergence("minimiser does not reflect off the outside of the obstacle")
        tan = np.array([-nu[1], nu[0]])
        s = radii[word[k]] * (theta[k] % (2 * np.pi))
        points.append(BoundaryPhasePoint(word[k], float(s), float(np.dot(u_out, tan))))
    if residual > residual_tol:
        raise NoConvergence(f"reflection-law residual {residual:.2e} exceeds {residual_tol:.0e}")

    monodromy = np.eye(2)
    for k, rho in enumerate(points):
        nxt = step(config, rho, "plus")
        if nxt.kind is StepKind.ESCAPE or nxt.target != word[(k + 1) % n]:
            raise NoConvergence("orbit segment is blocked by another obstacle")
        monodromy = jacobian_analytic(config, rho) @ monodromy
    length = float(_length_derivatives(centers, radii, word, theta)[0])
    return PeriodicOrbit(word, points, length, monodromy, residual, iterations)


# ---------------------------------------------------------------------------
# trapped set

def _survives(config, j, s, eta, depth):
    """Mask of points whose first ``depth`` forward and backward iterates exist."""
    alive = np.ones(j.shape, dtype=bool)
    for direction in (1, -1):
        jj, ss, ee = j.copy(), s.copy(), direction * eta
        ok = np.ones(j.shape, dtype=bool)
        for _ in range(depth):
            idx = np.flatnonzero(ok)
            if idx.size == 0:
                break
            tgt, s1, e1, _, status = advance(config, jj[idx], ss[idx], ee[idx])
            hit = status == HIT
            ok[idx[~hit]] = False
            jj[idx[hit]], ss[idx[hit]], ee[idx[hit]] = tgt[hit], s1[hit], e1[hit]
        alive &= ok
    return alive


def _transitions_hit(config, boxes_by_obs, j, s, eta, direction):
    """Mask of sample points whose one-step image lands in a current box."""
    tgt, s1, e1, _, status = advance(config, j, s, direction * eta)
    landed = np.zeros(j.shape, dtype=bool)
    hit = status == HIT
    e1 = direction * e1
    for obs, boxes in enumerate(boxes_by_obs):
        if len(boxes) == 0:
            continue
        sel = np.flatnonzero(hit & (tgt == obs))
        if sel.size == 0:
            continue
        # closed boxes, so points on shared edges count for both neighbours
        inside = ((s1[sel, None] >= boxes[None, :, 0]) & (s1[sel, None] <= boxes[None, :, 1])
                  & (e1[sel, None] >= boxes[None, :, 2]) & (e1[sel, None] <= boxes[None, :, 3]))
        landed[sel] = inside.any(axis=1)
    return landed


def _sample_points(boxes, samples):
    # the grid includes the box edges
    frac = np.linspace(0.0, 1.0, max(samples, 2))
    fs, fe = np.meshgrid(frac, frac, indexing="ij")
    fs, fe = fs.ravel(), fe.ravel()
    s = boxes[:, 0, None] + (boxes[:, 1] - boxes[:, 0])[:, None] * fs[None, :]
    e = boxes[:, 2, None] + (boxes[:, 3] - boxes[:, 2])[:, None] * fe[None, :]
    return s, e


def _quadrisect(boxes):
    s_mid = 0.5 * (boxes[:, 0] + boxes[:, 1])
    e_mid = 0.5 * (boxes[:, 2] + boxes[:, 3])
    out = []
    for s_lo, s_hi in ((boxes[:, 0], s_mid), (s_mid, boxes[:, 1])):
        for e_lo, e_hi in ((boxes[:, 2], e_mid), (e_mid, boxes[:, 3])):
            out.append(np.stack([s_lo, s_hi, e_lo, e_hi], axis=1))
    stacked = np.stack(out, axis=1).reshape(-1, 4)
    return stacked


def _area(boxes_by_obs):
    return float(sum(np.sum((b[:, 1] - b[:, 0]) * (b[:, 3] - b[:, 2])) for b in boxes_by_obs))


def trapped_set_cover(config: ObstacleConfig, depth: int, samples: int = 8,
                      method: str = "transition") -> TrappedSetCover:
    """Nested box cover of the trapped set of the billiard map.

    Depth 0 is the full coordinate rectangle ``[0, perimeter) x [-1, 1]`` of
    every obstacle.  Each further level quadrisects the kept boxes and keeps a
    child according to its ``samples x samples`` grid of sample points:

    * ``method='orbit'``: some sample's first ``level`` forward and backward
      iterates all exist;
    * ``method='transition'`` (default): some sample's forward image and some
      sample's backward image land inside boxes of the current level.  This
      is the set-oriented subdivision scheme; unlike the orbit rule it stays
      populated when the expansion rate exceeds the sample density.
    """
    if depth < 0:
        raise ValueError("depth must be nonnegative")
    if method not in ("transition", "orbit"):
        raise ValueError(f"unknown method {method!r}")
    boxes = [np.array([[0.0, p, -1.0, 1.0]]) for p in config.perimeters]
    history = [(0, len(config), _area(boxes))]
    for level in range(1, depth + 1):
        children = [_quadrisect(b) if len(b) else b for b in boxes]
        kept = []
        for obs, cand in enumerate(children):
            if len(cand) == 0:
                kept.append(cand)
                continue
            s, e = _sample_points(cand, samples)
            j = np.full(s.shape, obs)
            if method == "orbit":
                ok = _survives(config, j.ravel(), s.ravel(), e.ravel(), level)
            else:
                fwd = _transitions_hit(config, children, j.ravel(), s.ravel(), e.ravel(), 1)
                bwd = _transitions_hit(config, children, j.ravel(), s.ravel(), e.ravel(), -1)
                keep = fwd.reshape(s.shape).any(axis=1) & bwd.reshape(s.shape).any(axis=1)
                kept.append(cand[keep])
                continue
            keep = ok.reshape(s.shape).any(axis=1)
            kept.append(cand[keep])
        boxes = kept
        history.append((level, sum(len(b) for b in boxes), _area(boxes)))
    return TrappedSetCover(depth, boxes, _area(boxes), history)


def box_counting_dimension(cover: TrappedSetCover, min_level: int = 1) -> float:
    """Slope of log(box count) against log(1/box size) over the cover history."""
    levels = np.array([h[0] for h in cover.history if h[0] >= min_level and h[1] > 0], dtype=float)
    counts = np.array([h[1] for h in cover.history if h[0] >= min_level and h[1] > 0], dtype=float)
    if len(levels) < 2:
        raise ValueError("need at least two nonempty levels to fit a dimension")
    slope = np.polyfit(levels * math.log(2.0), np.log(counts), 1)[0]
    return float(slope)


def lyapunov_estimate(config: ObstacleConfig, source, steps: int = 8, max_points: int = 256) -> float:
    """Hyperbolicity rate from a periodic orbit, a word, or a trapped-set cover.

    For an orbit: ``log|mu| / period``.  For a cover: mean of
    ``log(sigma_max(DF^n)) / n`` over box centres whose ``n`` forward iterates
    exist, ``n`` the largest available up to ``steps``.
    """
    if isinstance(source, PeriodicOrbit):
        return source.lyapunov
    if isinstance(source, TrappedSetCover):
        if source.depth < 4:
            raise ValueError("cover depth must be at least 4")
        rates = []
        for obs, boxes in enumerate(source.boxes):
            for box in boxes[:max_points]:
                rho = BoundaryPhasePoint(obs, 0.5 * (box[0] + box[1]), 0.5 * (box[2] + box[3]))
                prod = np.eye(2)
                n = 0
                try:
                    for n in range(1, steps + 1):
                        prod = jacobian_analytic(config, rho) @ prod
                        rho = step(config, rho).arrival
                        if rho is None:
                            break
                except (NoHit, Glancing):
                    n -= 1
                if n >= 1:
                    rates.append(math.log(np.linalg.svd(prod, compute_uv=False)[0]) / n)
        if not rates:
            raise NoConvergence("no surviving pseudo-orbits in the cover")
        return float(np.mean(rates))
    return find_periodic_orbit(config, source).lyapunov
