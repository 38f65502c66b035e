# coding=utf-8
from __future__ import absolute_import, division, print_function, unicode_literals

import logging
import math
from collections import deque

import numpy as np

from mmldf.core.error import ConfigurationError, NonFiniteValue

logger = logging.getLogger(__name__)

# Pairs with s^T y below this multiple of ||s|| ||y|| are not stored.
CURVATURE_TOL = 1e-12

# Growth factor of the bracketing phase.
EXPANSION = 2.0

# Interpolated zoom trials must keep this fraction of the bracket to each end.
ZOOM_SAFEGUARD = 0.1

# A failed line search with the gradient within this factor of grad_tol, or a
# directional derivative below rounding of f, ends the run as converged.
PRECISION_GRAD_FACTOR = 10.0


class LbfgsConfig(object):
    __slots__ = (
        "memory",
        "wolfe_c1",
        "wolfe_c2",
        "grad_tol",
        "max_iters",
        "max_line_search_steps",
        "secant_refine",
    )

    def __init__(
        self,
        memory=10,
        wolfe_c1=1e-4,
        wolfe_c2=0.9,
        grad_tol=1e-6,
        max_iters=200,
        max_line_search_steps=40,
        secant_refine=True,
    ):
        self.memory = int(memory)
        self.wolfe_c1 = float(wolfe_c1)
        self.wolfe_c2 = float(wolfe_c2)
        self.grad_tol = float(grad_tol)
        self.max_iters = int(max_iters)
        self.max_line_search_steps = int(max_line_search_steps)
        self.secant_refine = bool(secant_refine)

        if self.memory < 0:
            raise ConfigurationError("memory must be >= 0")
        if not 0.0 < self.wolfe_c1 < 0.5:
            raise ConfigurationError("wolfe_c1 must be in (0, 0.5)")
        if not self.wolfe_c1 < self.wolfe_c2 < 1.0:
            raise ConfigurationError("wolfe_c2 must be in (wolfe_c1, 1)")
        if self.grad_tol < 0 or self.max_iters < 0 or self.max_line_search_steps < 1:
            raise ConfigurationError("tolerances and counts must be non-negative")

    def to_dict(self):
        return {name: getattr(self, name) for name in self.__slots__}

    @classmethod
    def from_dict(cls, data):
        return cls(**{k: v for k, v in data.items() if k in cls.__slots__})


class LbfgsState(object):
    """
    Ring buffer of the most recent (s, y) pairs plus the initial Hessian
    scaling gamma = s^T y / y^T y of the newest stored pair.
    """

    __slots__ = ("pairs", "k", "gamma")

    def __init__(self, memory):
        self.pairs = deque(maxlen=memory)
        self.k = 0
        self.gamma = 1.0

    def push(self, s, y):
        sy = s.dot(y)
        if not sy > CURVATURE_TOL * np.linalg.norm(s) * np.linalg.norm(y):
            logger.debug("Skipping curvature pair at iteration %s: s^T y = %r", self.k, sy)
            return False
        self.gamma = sy / y.dot(y)
        self.pairs.append((s, y, 1.0 / sy))
        return True

    def clear(self):
        self.pairs.clear()

    def direction(self, g):
        """Two-loop recursion: returns -H_k g."""
        q = g.copy()
        alphas = []
        for s, y, rho in reversed(self.pairs):
            alpha = rho * s.dot(q)
            q -= alpha * y
            alphas.append(alpha)
        r = self.gamma * q
        for (s, y, rho), alpha in zip(self.pairs, reversed(alphas)):
            beta = rho * y.dot(r)
            r += (alpha - beta) * s
        return -r


class WolfeStep(object):
    """An accepted step: x_new = x + alpha d with the quantities of both tests."""

    __slots__ = ("alpha", "f0", "slope0", "f1", "slope1")

    def __init__(self, alpha, f0, slope0, f1, slope1):
        self.alpha = alpha
        self.f0 = f0
        self.slope0 = slope0
        self.f1 = f1
        self.slope1 = slope1

    def satisfies(self, c1, c2):
        return (
            self.f1 <= self.f0 + c1 * self.alpha * self.slope0
            and abs(self.slope1) <= c2 * abs(self.slope0)
        )


class LbfgsReport(object):
    __slots__ = (
        "iterations",
        "value_trace",
        "grad_evals",
        "value_evals",
        "converged",
        "line_search_failed",
        "grad_norm",
        "steps",
        "message",
    )

    def __init__(self):
        self.iterations = 0
        self.value_trace = []
        self.grad_evals = 0
        self.value_evals = 0
        self.converged = False
        self.line_search_failed = False
        self.grad_norm = math.inf
        self.steps = []
        self.message = ""

    def __repr__(self):
        return "<LbfgsReport(iterations={}, converged={}, message={!r})>".format(
            self.iterations, self.converged, self.message
        )


class _LineSearchResult(object):
    __slots__ = ("ok", "alpha", "f", "g", "slope")

    def __init__(self, ok, alpha, f, g, slope):
        self.ok = ok
        self.alpha = alpha
        self.f = f
        self.g = g
        self.slope = slope


def _interpolate(a_lo, f_lo, s_lo, a_hi, f_hi, s_hi):
    """
    Minimizer of the cubic (or quadratic) model through both bracket ends,
    kept away from the ends; bisection when the model is unusable.
    """
    low, high = min(a_lo, a_hi), max(a_lo, a_hi)
    margin = ZOOM_SAFEGUARD * (high - low)
    candidate = None
    if math.isfinite(f_hi) and s_hi is not None and math.isfinite(s_hi):
        d1 = s_lo + s_hi - 3.0 * (f_lo - f_hi) / (a_lo - a_hi)
        radicand = d1 * d1 - s_lo * s_hi
        if radicand >= 0.0:
            d2 = math.copysign(math.sqrt(radicand), a_hi - a_lo)
            denominator = s_hi - s_lo + 2.0 * d2
            if denominator != 0.0:
                candidate = a_hi - (a_hi - a_lo) * (s_hi + d2 - d1) / denominator
    if candidate is None and math.isfinite(f_hi):
        delta = a_hi - a_lo
        curvature = f_hi - f_lo - s_lo * delta
        if curvature > 0.0:
            candidate = a_lo - s_lo * delta * delta / (2.0 * curvature)
    if (
        candidate is None
        or not math.isfinite(candidate)
        or candidate < low + margin
        or candidate > high - margin
    ):
        candidate = 0.5 * (low + high)
    return candidate


class _LineSearch(object):
    """
    Strong Wolfe line search: bracketing with step doubling from alpha = 1,
    then zoom by safeguarded interpolation.
    """

    def __init__(self, evaluate, x, f0, d, slope0, cfg):
        self.evaluate = evaluate
        self.x = x
        self.f0 = f0
        self.d = d
        self.slope0 = slope0
        self.cfg = cfg
        self.trials = 0
        self.best = None

    def trial(self, alpha):
        self.trials += 1
        f, g = self.evaluate(self.x + alpha * self.d, strict=False)
        if not math.isfinite(f) or g is None:
            return math.inf, None, None
        slope = g.dot(self.d)
        if f < self.f0 and (self.best is None or f < self.best.f):
            self.best = _LineSearchResult(False, alpha, f, g, slope)
        return f, g, slope

    def sufficient(self, alpha, f):
        return f <= self.f0 + self.cfg.wolfe_c1 * alpha * self.slope0

    def curvature(self, slope):
        return abs(slope) <= -self.cfg.wolfe_c2 * self.slope0

    def run(self):
        budget = self.cfg.max_line_search_steps
        a_prev, f_prev, s_prev = 0.0, self.f0, self.slope0
        alpha = 1.0
        while self.trials < budget:
            f, g, slope = self.trial(alpha)
            if not self.sufficient(alpha, f) or (self.trials > 1 and f >= f_prev):
                return self.zoom(a_prev, f_prev, s_prev, alpha, f, slope)
            if self.curvature(slope):
                return self.refine(_LineSearchResult(True, alpha, f, g, slope))
            if slope >= 0.0:
                return self.zoom(alpha, f, slope, a_prev, f_prev, s_prev)
            a_prev, f_prev, s_prev = alpha, f, slope
            alpha *= EXPANSION
        return self.failure()

    def zoom(self, a_lo, f_lo, s_lo, a_hi, f_hi, s_hi):
        while self.trials < self.cfg.max_line_search_steps:
            if abs(a_hi - a_lo) <= 1e-16 * max(1.0, abs(a_lo)):
                break
            alpha = _interpolate(a_lo, f_lo, s_lo, a_hi, f_hi, s_hi)
            f, g, slope = self.trial(alpha)
            if not self.sufficient(alpha, f) or f >= f_lo:
                a_hi, f_hi, s_hi = alpha, f, slope
                continue
            if self.curvature(slope):
                return self.refine(_LineSearchResult(True, alpha, f, g, slope))
            if slope * (a_hi - a_lo) >= 0.0:
                a_hi, f_hi, s_hi = a_lo, f_lo, s_lo
            a_lo, f_lo, s_lo = alpha, f, slope
        return self.failure()

    def refine(self, accepted):
        """
        One extra trial at the root of the secant model of the directional
        derivative; kept only when it also meets both Wolfe conditions with a
        lower value. Exact on quadratics.
        """
        if not self.cfg.secant_refine or self.trials >= self.cfg.max_line_search_steps:
            return accepted
        denominator = self.slope0 - accepted.slope
        if denominator == 0.0 or accepted.slope == 0.0:
            return accepted
        alpha = accepted.alpha * self.slope0 / denominator
        if not math.isfinite(alpha) or alpha <= 0.0:
            return accepted
        if abs(alpha - accepted.alpha) <= 1e-12 * accepted.alpha:
            return accepted
        f, g, slope = self.trial(alpha)
        if (
            g is not None
            and f < accepted.f
            and self.sufficient(alpha, f)
            and self.curvature(slope)
        ):
            return _LineSearchResult(True, alpha, f, g, slope)
        return accepted

    def failure(self):
        if self.best is not None:
            return self.best
        return _LineSearchResult(False, 0.0, self.f0, None, None)


def _at_precision_limit(grad_norm, f, slope, cfg):
    if grad_norm <= PRECISION_GRAD_FACTOR * cfg.grad_tol:
        return True
    return abs(slope) <= np.finfo(np.float64).eps * max(1.0, abs(f))


def minimize(oracle, x0, cfg=None):
    """
    Minimize a smooth function with limited-memory BFGS.

    ``oracle(x)`` returns ``(value, gradient)`` for a flat vector ``x``.
    Returns the final point and an LbfgsReport whose value trace is
    non-increasing.
    """
    if cfg is None:
        cfg = LbfgsConfig()
    report = LbfgsReport()

    def evaluate(x, strict=True):
        report.value_evals += 1
        report.grad_evals += 1
        value, grad = oracle(x)
        value = float(value)
        grad = np.asarray(grad, dtype=np.float64).reshape(-1)
        if not (math.isfinite(value) and np.all(np.isfinite(grad))):
            if strict:
                raise NonFiniteValue(
                    "oracle returned a non-finite value or gradient at the "
                    "starting point"
                )
            return math.inf, None
        return value, grad

    x = np.array(x0, dtype=np.float64).reshape(-1)
    f, g = evaluate(x)
    report.value_trace.append(f)
    state = LbfgsState(cfg.memory)

    while True:
        report.grad_norm = float(np.max(np.abs(g))) if g.size else 0.0
        if report.grad_norm <= cfg.grad_tol:
            report.converged = True
            report.message = "gradient tolerance reached"
            break
        if report.iterations >= cfg.max_iters:
            report.message = "maximum iterations reached"
            logger.debug("L-BFGS stopped after %s iterations", report.iterations)
            break

        d = state.direction(g)
        slope = g.dot(d)
        if not slope < 0.0:
            logger.debug(
                "Non-descent direction at iteration %s; resetting to -gradient",
                state.k,
            )
            state.clear()
            d = -g
            slope = -g.dot(g)

        result = _LineSearch(evaluate, x, f, d, slope, cfg).run()
        if not result.ok and _at_precision_limit(report.grad_norm, f, slope, cfg):
            report.converged = True
            report.message = "precision limit reached"
            logger.debug(
                "Line search stalled at iteration %s with max|g|=%.3e; "
                "treating as converged",
                report.iterations,
                report.grad_norm,
            )
            if result.g is not None and result.f < f:
                x = x + result.alpha * d
                f, g = result.f, result.g
                report.iterations += 1
                report.value_trace.append(f)
                report.grad_norm = float(np.max(np.abs(g)))
            break
        if not result.ok:
            report.line_search_failed = True
            report.message = "line search failed"
            logger.warning(
                "Line search failed at iteration %s (f=%r); keeping best point",
                report.iterations,
                f,
            )
            if result.g is not None:
                x = x + result.alpha * d
                f, g = result.f, result.g
                report.iterations += 1
                report.value_trace.append(f)
                report.grad_norm = float(np.max(np.abs(g)))
            break

        x_new = x + result.alpha * d
        report.steps.append(WolfeStep(result.alpha, f, slope, result.f, result.slope))
        state.push(x_new - x, result.g - g)
        state.k += 1
        x, f, g = x_new, result.f, result.g
        report.iterations += 1
        report.value_trace.append(f)

    return x, report
