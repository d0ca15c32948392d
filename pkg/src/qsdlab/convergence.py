"""Distance-to-limit curves, decay-rate fits, and mixing certificates.

Everything here works on a truncated killed generator and its solved
long-run law.  Curves track the total-variation distance of the conditioned
law to the long-run law along a time grid; rate fits extract the geometric
decay from the clean middle of such a curve; the certificates witness a
return-mass lower bound and a survival comparison whose product gives an
explicit mixing rate.
"""

from dataclasses import dataclass, field
import math

import numpy as np

from .errors import DomainError, NoFitError, NumericalError, ValidationError
from .solver import (QsdResult, SubGenerator, conditional_path,
                     evolve_function, evolve_measure)


def tv_distance(p, q) -> float:
    """Total-variation distance between two laws on the same state list."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if p.shape != q.shape or p.ndim != 1:
        raise DomainError(f"laws have mismatched shapes {p.shape} and {q.shape}")
    return float(0.5 * np.abs(p - q).sum())


# ---------------------------------------------------------------------------
# convergence curves and rate fits
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ConvergenceCurve:
    """Distance to the long-run law along a time grid, from one start."""

    initial: tuple
    times: np.ndarray
    tv: np.ndarray
    survival: np.ndarray

    def rows(self):
        """(time, tv, survival) triples, for tabular output."""
        return list(zip(self.times.tolist(), self.tv.tolist(),
                        self.survival.tolist()))


def convergence_curve(Q: SubGenerator, qsd: QsdResult, initial,
                      times) -> ConvergenceCurve:
    """Conditioned-law distance to the long-run law along ``times``.

    The curve is computed by exact stepping between grid points, so the
    survival column is nonincreasing by construction; a violation would mean
    a corrupted generator and raises.
    """
    initial = tuple(int(v) for v in initial)
    mu0 = Q.space.point_mass(initial)
    laws, survival = conditional_path(Q, mu0, times)
    tv = 0.5 * np.abs(laws - qsd.law).sum(axis=1)
    if (np.diff(survival) > 0).any() or (survival > 1.0).any():
        raise NumericalError("survival failed to decrease along the grid")
    return ConvergenceCurve(initial=initial, times=np.asarray(times, dtype=float),
                            tv=tv, survival=survival)


@dataclass(frozen=True)
class RateFit:
    """Log-linear fit ``tv(t) ~ amplitude * exp(-rate * t)`` on a window."""

    rate: float
    amplitude: float
    window: tuple
    points: int
    max_log_residual: float


def fit_rate(curve: ConvergenceCurve, tv_window=(1e-6, 1e-1),
             min_points: int = 5) -> RateFit:
    """Geometric decay rate of a convergence curve.

    Fits ``log tv`` against time on the clean stretch where the distance
    lies inside ``tv_window`` — above the numerical floor, below the initial
    transient.  Raises when fewer than ``min_points`` grid points fall in
    the window or when the fitted rate is not positive.
    """
    lo, hi = tv_window
    mask = (curve.tv >= lo) & (curve.tv <= hi)
    points = int(mask.sum())
    if points < min_points:
        raise NoFitError(
            f"only {points} grid points have tv in [{lo:g}, {hi:g}]; "
            f"need {min_points}")
    t = curve.times[mask]
    logtv = np.log(curve.tv[mask])
    slope, intercept = np.polyfit(t, logtv, 1)
    rate = -float(slope)
    if not rate > 0:
        raise NoFitError(f"fitted rate {rate:g} is not positive")
    residual = float(np.max(np.abs(logtv - (slope * t + intercept))))
    return RateFit(rate=rate, amplitude=float(math.exp(intercept)),
                   window=(float(t[0]), float(t[-1])), points=points,
                   max_log_residual=residual)


def survival_profile_error(Q: SubGenerator, qsd: QsdResult, t: float) -> float:
    """Worst-case gap between rescaled survival and the survival profile.

    Computes ``exp(decay_rate * t) * P_x(alive at t)`` for every start x and
    returns the sup-norm distance to the solved survival profile.  As t
    grows the gap falls to a plateau set by the subdominant spectral mass.
    """
    if t < 0:
        raise DomainError(f"t must be nonnegative, got {t}")
    scale = qsd.decay_rate * t
    if scale > 600.0:
        raise NumericalError(
            f"horizon too deep to rescale: decay_rate * t = {scale:g}")
    alive = evolve_function(Q, np.ones(len(Q.space.states)), t)
    return float(np.max(np.abs(math.exp(scale) * alive - qsd.survival_profile)))


# ---------------------------------------------------------------------------
# mixing certificates
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MinorizationCertificate:
    """Witnessed lower bound on the conditioned return mass at one state.

    ``mass`` bounds, uniformly over every start x, the probability that the
    chain sits at ``reference`` at time ``t0`` given survival.  The bound is
    re-verified at the minimizing start by propagating a point mass forward
    (a route through different code and different roundoff);
    ``reproduction`` is the disagreement between the two routes.
    """

    reference: tuple
    t0: float
    mass: float
    minimizer: tuple
    reproduction: float

    @property
    def valid(self) -> bool:
        return self.t0 > 0 and self.mass > 0

    def to_dict(self) -> dict:
        return {"reference": list(self.reference), "t0": self.t0,
                "mass": self.mass, "minimizer": list(self.minimizer),
                "reproduction": self.reproduction, "valid": self.valid}


def certify_minorization(Q: SubGenerator, t0: float, reference=None,
                         qsd: QsdResult | None = None) -> MinorizationCertificate:
    """Uniform conditioned return-mass bound at a reference state.

    For every start x, ``P_x(at reference at t0) / P_x(alive at t0)`` is
    computed by two adjoint propagations; the minimum over x is the
    certificate mass.  ``t0 = 0`` is allowed but yields mass 0 — an invalid
    certificate — because the indicator of the reference has zeros.
    """
    if t0 < 0:
        raise DomainError(f"t0 must be nonnegative, got {t0}")
    if reference is None:
        if qsd is None:
            raise ValidationError("need a reference state or a solved law "
                                  "to pick one from")
        reference = Q.space.states[int(np.argmax(qsd.law))]
    reference = tuple(int(v) for v in reference)
    if reference not in Q.space.index:
        raise DomainError(f"reference state {reference} is outside the space")
    ref = Q.space.index[reference]
    size = len(Q.space.states)
    indicator = np.zeros(size)
    indicator[ref] = 1.0
    hit = evolve_function(Q, indicator, t0)
    alive = evolve_function(Q, np.ones(size), t0)
    if not (alive > 0).all():
        raise NumericalError("survival underflowed at some start; shrink t0")
    ratios = hit / alive
    i = int(np.argmin(ratios))
    mass = float(ratios[i])

    # Independent re-verification at the minimizer: push its point mass
    # forward and read off the same two numbers from the measure side.
    point = np.zeros(size)
    point[i] = 1.0
    row = evolve_measure(Q, point, t0)
    reproduction = max(abs(float(row[ref]) - float(hit[i])),
                       abs(float(row.sum()) - float(alive[i])))
    return MinorizationCertificate(
        reference=reference, t0=float(t0), mass=mass,
        minimizer=Q.space.states[i], reproduction=float(reproduction))


@dataclass(frozen=True)
class SurvivalComparisonCertificate:
    """Witnessed lower bound on reference survival against the best start."""

    reference: tuple
    horizon: float
    ratio: float
    worst_time: float
    reproduction: float

    @property
    def valid(self) -> bool:
        return 0 < self.ratio <= 1.0

    def to_dict(self) -> dict:
        return {"reference": list(self.reference), "horizon": self.horizon,
                "ratio": self.ratio, "worst_time": self.worst_time,
                "reproduction": self.reproduction, "valid": self.valid}


def certify_survival_comparison(Q: SubGenerator, reference,
                                times) -> SurvivalComparisonCertificate:
    """Survival from the reference state versus the luckiest start.

    Scans ``min_t P_ref(alive at t) / max_x P_x(alive at t)`` over the given
    grid, always including t = 0 (where the ratio is exactly 1, so the
    result never exceeds 1).  The scan is repeated on a doubled grid and the
    disagreement of the two minima is reported as ``reproduction``.
    """
    reference = tuple(int(v) for v in reference)
    if reference not in Q.space.index:
        raise DomainError(f"reference state {reference} is outside the space")
    times = np.asarray(times, dtype=float)
    if times.ndim != 1 or len(times) == 0 or (times < 0).any():
        raise DomainError("times must be a nonnegative 1-d grid")
    times = np.unique(times)
    if times[0] != 0.0:
        times = np.concatenate(([0.0], times))

    def scan(grid):
        size = len(Q.space.states)
        point = np.zeros(size)
        point[Q.space.index[reference]] = 1.0
        alive = np.ones(size)
        best_ratio = math.inf
        best_t = 0.0
        prev = 0.0
        for t in grid:
            point = evolve_measure(Q, point, t - prev)
            alive = evolve_function(Q, alive, t - prev)
            prev = t
            ratio = float(point.sum()) / float(alive.max())
            if ratio < best_ratio:
                best_ratio, best_t = ratio, float(t)
        return best_ratio, best_t

    ratio, worst_time = scan(times)
    fine = np.unique(np.concatenate((times, (times[1:] + times[:-1]) / 2.0)))
    fine_ratio, _ = scan(fine)
    return SurvivalComparisonCertificate(
        reference=reference, horizon=float(times[-1]), ratio=ratio,
        worst_time=worst_time, reproduction=abs(ratio - fine_ratio))


@dataclass(frozen=True)
class MixingCertificate:
    """Explicit geometric mixing bound assembled from the two certificates.

    When valid, the conditioned law contracts in total variation by a factor
    ``1 - return_mass * survival_ratio`` every ``t0`` units of time, giving
    the stated exponential rate bound.
    """

    minorization: MinorizationCertificate
    comparison: SurvivalComparisonCertificate
    rate_bound: float

    @property
    def valid(self) -> bool:
        return self.minorization.valid and self.comparison.valid

    def to_dict(self) -> dict:
        return {"minorization": self.minorization.to_dict(),
                "survival_comparison": self.comparison.to_dict(),
                "rate_bound": self.rate_bound, "valid": self.valid}


def mixing_certificate(Q: SubGenerator, qsd: QsdResult, t0: float,
                       horizon: float | None = None,
                       grid_points: int = 64) -> MixingCertificate:
    """Build both certificates around the law's modal state.

    The survival comparison is scanned on a uniform grid over ``[0,
    horizon]`` (default ``8 * t0``).  The rate bound is
    ``-log(1 - product) / t0`` when the product of the two masses is
    positive, else 0.
    """
    if horizon is None:
        horizon = 8.0 * t0
    minor = certify_minorization(Q, t0, qsd=qsd)
    grid = np.linspace(0.0, horizon, grid_points)
    comp = certify_survival_comparison(Q, minor.reference, grid)
    product = minor.mass * comp.ratio
    rate = -math.log1p(-product) / t0 if 0 < product < 1 and t0 > 0 else 0.0
    return MixingCertificate(minorization=minor, comparison=comp,
                             rate_bound=rate)
