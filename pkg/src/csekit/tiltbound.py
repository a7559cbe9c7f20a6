"""Tilt-Bound evaluation and its tilewise optimization.

The Tilt-Bound at knowledge point ``theta0`` with displacement ``v`` and
Holder exponent ``q`` is::

    U(theta0, v, q, a) = a**(1 - 1/q) * exp(psi(q)/q - psi(1))

with ``psi(q) = A(theta0 + q v) - A(theta0)``. It is quasi-convex in ``q``
(so a golden-section search on a monotone reparametrization of ``q`` finds the
optimum) and quasi-convex in ``v`` (so its supremum over a hyperrectangle is
attained at a vertex).
"""

import math
from dataclasses import dataclass

import numpy as np

from ._validation import check_displacement, check_param_point, check_unit_interval
from .model import psi

__all__ = [
    "BoundQuery",
    "BoundResult",
    "golden_section_minimize",
    "tilt_exponent",
    "forward_bound",
    "inverse_bound",
    "lower_bound",
    "optimize_forward",
    "optimize_inverse",
    "optimize_lower",
    "q_profile",
    "rescale_bounded",
    "pinsker_bound",
    "taylor_bound",
]

LOG_Q_SPAN = (math.log(1e-6), math.log(1e7))
MAX_ITER = 200
REL_TOL = 1e-10

_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True, eq=False)
class BoundQuery:
    """Knowledge point, tile vertex displacements and the value to extend.

    ``value`` is ``f(theta0)`` for the forward problem or the target level
    ``alpha`` for the inverse problem.
    """

    theta0: np.ndarray
    vertices: np.ndarray
    value: float

    def __post_init__(self):
        theta0 = np.atleast_1d(np.asarray(self.theta0, dtype=float))
        vertices = np.atleast_2d(np.asarray(self.vertices, dtype=float))
        if vertices.shape[0] == 0 or vertices.size == 0:
            raise ValueError("vertex list must be non-empty")
        if vertices.shape[1] != theta0.shape[0]:
            vertices = vertices.reshape(-1, theta0.shape[0])
        check_param_point(theta0, theta0.shape[0])
        check_displacement(vertices, theta0.shape[0])
        object.__setattr__(self, "theta0", theta0)
        object.__setattr__(self, "vertices", vertices)
        object.__setattr__(self, "value", check_unit_interval(self.value, "value"))


@dataclass(frozen=True)
class BoundResult:
    bound: float
    q_star: float
    argmax_vertex: int


def golden_section_minimize(f, lo, hi, rel_tol=REL_TOL, max_iter=MAX_ITER):
    """Minimize a unimodal ``f`` on ``[lo, hi]``.

    Returns ``(x, f(x))`` for the better of the final interior points.
    Stops once the bracket is narrow and the two interior values agree to
    ``rel_tol`` (relative), or after ``max_iter`` iterations.
    """
    x1 = hi - _INVPHI * (hi - lo)
    x2 = lo + _INVPHI * (hi - lo)
    f1, f2 = f(x1), f(x2)
    for _ in range(max_iter):
        if abs(f1 - f2) <= rel_tol * max(abs(f1), abs(f2), 1e-300) and hi - lo < 1e-8:
            break
        if f1 <= f2:
            hi, x2, f2 = x2, x1, f1
            x1 = hi - _INVPHI * (hi - lo)
            f1 = f(x1)
        else:
            lo, x1, f1 = x1, x2, f2
            x2 = lo + _INVPHI * (hi - lo)
            f2 = f(x2)
        if hi - lo < 1e-14:
            break
    best_f, best_x = min((f1, x1), (f2, x2))
    return best_x, best_f


def _minimize_endpoints(f, lo, hi, **kw):
    x, fx = golden_section_minimize(f, lo, hi, **kw)
    for edge in (lo, hi):
        fe = f(edge)
        if fe < fx:
            x, fx = edge, fe
    return x, fx


def tilt_exponent(family, theta0, v, q):
    """``psi(q)/q - psi(1)``, the exponent shared by forward and inverse bounds."""
    return psi(family, theta0, v, q) / np.asarray(q, dtype=float) - psi(family, theta0, v, 1.0)


def _log_forward(log_a, q, exponent):
    return (1.0 - 1.0 / q) * log_a + exponent


def forward_bound(family, theta0, v, q, a):
    """Tilt-Bound on ``f(theta0 + v)`` given ``f(theta0) = a``, clamped to 1."""
    a = check_unit_interval(a, "a")
    q = float(q)
    if q < 1:
        raise ValueError("q must be >= 1")
    if a == 0.0:
        return 0.0
    if q == 1.0:
        return 1.0
    exponent = float(tilt_exponent(family, theta0, v, q))
    return min(1.0, math.exp(_log_forward(math.log(a), q, exponent)))


def inverse_bound(family, theta0, v, q, alpha):
    """Largest ``a`` whose forward bound at ``(theta0, v, q)`` is ``alpha``."""
    alpha = check_unit_interval(alpha, "alpha", open_low=True)
    q = float(q)
    if q <= 1:
        raise ValueError("q must exceed 1 for the inverse bound")
    exponent = float(tilt_exponent(family, theta0, v, q))
    return math.exp(q / (q - 1.0) * (math.log(alpha) - exponent))


def lower_bound(family, theta0, v, q, a):
    """Lower Tilt-Bound on ``f(theta0 + v)``, obtained by bounding ``1 - f``."""
    a = check_unit_interval(a, "a")
    return max(0.0, 1.0 - forward_bound(family, theta0, v, q, 1.0 - a))


def _vertex_exponents(family, theta0, vertices, q):
    return tilt_exponent(family, theta0, vertices, q)


def _q_of(u):
    return 1.0 + math.exp(u)


def q_profile(family, query, qs, inverse=False):
    """Unclamped log of the tilewise bound at each ``q`` in ``qs``.

    Forward: ``max_v log U``; inverse: ``min_v log U^-1``.
    """
    log_v = math.log(query.value) if query.value > 0 else -math.inf
    qs = np.asarray(qs, dtype=float)
    worst = np.max(_vertex_exponents(family, query.theta0, query.vertices, qs[:, None]), axis=1)
    if inverse:
        return qs / (qs - 1.0) * (log_v - worst)
    return _log_forward(log_v, qs, worst)


def optimize_forward(family, query):
    """Tilewise optimized Tilt-Bound: ``inf_q max_v U(theta0, v, q, a)``."""
    a = query.value
    vertices = query.vertices
    if not np.any(vertices):
        return BoundResult(a, math.inf, 0)
    if a == 0.0:
        return BoundResult(0.0, math.inf, 0)
    if a == 1.0:
        return BoundResult(1.0, 1.0, 0)
    log_a = math.log(a)

    def objective(u):
        q = _q_of(u)
        return _log_forward(log_a, q, float(np.max(_vertex_exponents(family, query.theta0, vertices, q))))

    u, val = _minimize_endpoints(objective, *LOG_Q_SPAN)
    q = _q_of(u)
    idx = int(np.argmax(_vertex_exponents(family, query.theta0, vertices, q)))
    return BoundResult(min(1.0, math.exp(val)), q, idx)


def optimize_inverse(family, query):
    """Calibration target ``sup_q min_v U^-1(theta0, v, q, alpha)``."""
    alpha = query.value
    vertices = query.vertices
    if alpha == 0.0:
        return BoundResult(0.0, math.inf, 0)
    if not np.any(vertices):
        return BoundResult(alpha, math.inf, 0)
    log_alpha = math.log(alpha)

    def neg_objective(u):
        q = _q_of(u)
        worst = float(np.max(_vertex_exponents(family, query.theta0, vertices, q)))
        return -(q / (q - 1.0)) * (log_alpha - worst)

    u, val = _minimize_endpoints(neg_objective, *LOG_Q_SPAN)
    q = _q_of(u)
    idx = int(np.argmax(_vertex_exponents(family, query.theta0, vertices, q)))
    return BoundResult(min(alpha, math.exp(-val)), q, idx)


def optimize_lower(family, query):
    """Tilewise optimized lower bound: ``1 - inf_q max_v U(theta0, v, q, 1 - a)``."""
    upper = optimize_forward(
        family, BoundQuery(query.theta0, query.vertices, 1.0 - query.value)
    )
    return BoundResult(max(0.0, 1.0 - upper.bound), upper.q_star, upper.argmax_vertex)


def rescale_bounded(bound_on_unit, lo, hi):
    """Map a bound on the ``[0, 1]``-rescaled function back to ``[lo, hi]``."""
    if lo >= hi:
        raise ValueError("need lo < hi")
    bound_on_unit = check_unit_interval(bound_on_unit, "bound_on_unit")
    return lo + (hi - lo) * bound_on_unit


def pinsker_bound(a, kl):
    """``a + sqrt(KL / 2)``, clamped to 1."""
    a = check_unit_interval(a, "a")
    if kl < 0:
        raise ValueError("KL divergence must be non-negative")
    return min(1.0, a + math.sqrt(kl / 2.0))


def taylor_bound(a, grad_dot_v, hess_sup, vnorm2):
    """Second-order Taylor bound with a uniform curvature bound ``hess_sup``."""
    if hess_sup < 0:
        raise ValueError("hess_sup must be non-negative")
    return min(1.0, a + grad_dot_v + hess_sup * vnorm2 / 2.0)
