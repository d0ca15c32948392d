"""Finite-range certification of drift and shape hypotheses.

Every asymptotic hypothesis about a model (rate envelopes, self-regulation
dominating cross-pressure, drift of a bounded potential, smallness of
catastrophes) is checked on an explicit range of population sizes.  A check
never claims anything beyond its range: verdicts are ``pass-on-range`` with
explicitly witnessed constants, ``fail`` with a concrete witness state, or
``inconclusive`` when the sampled evidence cannot settle the question.

The bounded potential used throughout is a truncated power series in the
total population size: it is 1 at size one, increases toward a finite limit
``1 + 1/eps``, and is 0 on absorbed states.  Differences of the potential
between two sizes telescope, which gives sharp two-sided brackets without
summing the series.
"""

from dataclasses import dataclass, field
import math

import numpy as np

from .errors import DomainError, NumericalError, ValidationError
from .model import Model, is_absorbed, is_interior

PASS = "pass-on-range"
FAIL = "fail"
INCONCLUSIVE = "inconclusive"

# A log-log slope shallower than this counts as "bounded" for growth
# heuristics, and steeper than its negative as "decaying".
_FLAT_SLOPE = 0.05
# Relative slack when testing monotonicity of sampled curves.
_MONOTONE_SLACK = 1e-9
# Half-grid quadrature-error estimates are compared against margins with
# this safety factor, since they assume the asymptotic refinement regime.
_QUAD_SAFETY = 3.0


# ---------------------------------------------------------------------------
# bounded size potential
# ---------------------------------------------------------------------------

_POTENTIAL_CACHE: dict = {}


def _potential_table(eps: float, size: int) -> np.ndarray:
    """Cumulative sums of j**-(1+eps); entry s is the potential at size s."""
    table = _POTENTIAL_CACHE.get(eps)
    if table is None or len(table) <= size:
        length = max(size + 1, 4096)
        js = np.arange(1, length, dtype=float)
        table = np.concatenate(([0.0], np.cumsum(js ** -(1.0 + eps))))
        _POTENTIAL_CACHE[eps] = table
    return table


def size_potential(n, eps: float) -> float:
    """Bounded potential of a state, a function of total size alone.

    Interior states map to ``sum(1/j**(1+eps) for j=1..|n|)``; absorbed
    states map to 0.  Values lie in ``[1, 1 + 1/eps)`` on the interior.
    """
    if eps <= 0:
        raise ValidationError(f"eps must be positive, got {eps}")
    if is_absorbed(n):
        return 0.0
    size = int(sum(n))
    return float(_potential_table(eps, size)[size])


def size_potential_bracket(smaller: int, larger: int, eps: float):
    """Two-sided bracket for the potential gap between two interior sizes.

    For total sizes ``1 <= smaller <= larger`` the gap ``V(larger) -
    V(smaller)`` is a tail sum of ``j**-(1+eps)``; integral comparison
    brackets it without evaluating the sum.  Returns ``(lower, upper)``.
    """
    if eps <= 0:
        raise ValidationError(f"eps must be positive, got {eps}")
    if not 1 <= smaller <= larger:
        raise DomainError(
            f"need 1 <= smaller <= larger, got {smaller}, {larger}")
    lower = ((smaller + 1) ** -eps - (larger + 1) ** -eps) / eps
    upper = (smaller ** -eps - larger ** -eps) / eps
    return lower, upper


def apply_generator(model: Model, f, n) -> float:
    """Evaluate ``sum(rate * (f(target) - f(n)))`` over all moves from n.

    ``f`` must accept every reachable target, including absorbed states.
    Summation follows the model's fixed move enumeration, so the result is
    bit-reproducible.
    """
    if len(n) != model.r:
        raise DomainError(f"state {n} has arity {len(n)}, model has {model.r}")
    if not is_interior(n):
        raise DomainError(f"state {n} is not interior")
    targets, rates, _ = model.transition_table(n)
    fn = f(n)
    total = 0.0
    for target, rate in zip(targets, rates):
        total += rate * (f(target) - fn)
    return float(total)


@dataclass(frozen=True)
class PotentialParams:
    """A candidate exponent for the bounded potential plus its valid window."""

    eps: float
    window: tuple

    @classmethod
    def for_model(cls, model: Model, eps: float | None = None):
        """Window ``(0, gamma*(1 - beta2))``; default eps is the midpoint."""
        beta2 = model.beta2 if model.beta2 is not None else 0.0
        high = model.gamma * (1.0 - beta2)
        if high <= 0:
            raise ValidationError(
                f"no admissible potential exponent: gamma*(1-beta2) = {high}")
        if eps is None:
            eps = high / 2.0
        if not 0.0 < eps < high:
            raise DomainError(
                f"eps {eps} outside the admissible window (0, {high})")
        return cls(eps=float(eps), window=(0.0, float(high)))


# ---------------------------------------------------------------------------
# deterministic shell sampling
# ---------------------------------------------------------------------------

def _states_of_size(r: int, size: int):
    """All interior states with the given total size, lexicographic."""
    if r == 1:
        return [(size,)] if size >= 1 else []
    out = []
    for first in range(1, size - r + 2):
        for rest in _states_of_size(r - 1, size - first):
            out.append((first,) + rest)
    return out

def _shell_representatives(r: int, size: int):
    """A small deterministic cross-section of the shell |n| = size."""
    if r == 1:
        return [(size,)]
    reps = set()
    base, rem = divmod(size, r)
    if base >= 1:
        reps.add(tuple(base + (1 if i < rem else 0) for i in range(r)))
    for i in range(r):
        big = size - (r - 1)
        if big >= 1:
            corner = [1] * r
            corner[i] = big
            reps.add(tuple(corner))
        half = size // 2
        rest = size - half
        if half >= 1 and rest >= r - 1:
            lop = [rest // (r - 1)] * (r - 1) if r > 1 else []
            for k in range(rest - sum(lop)):
                lop[k % (r - 1)] += 1
            state = lop[:i] + [half] + lop[i:]
            if min(state) >= 1:
                reps.add(tuple(state))
    return sorted(reps)


def sample_shells(r: int, n_check: int, dense_budget: int = 4000):
    """Deterministic per-size samples of states up to total size n_check.

    Returns ``{size: [states]}``.  Small shells are enumerated exhaustively
    until the budget is spent; larger sizes get a geometric ladder of
    cross-section representatives (balanced, single-type-dominant, and
    half-loaded states).  One type means every shell is the single state.
    """
    if n_check < r:
        raise DomainError(f"n_check {n_check} below smallest size {r}")
    shells = {}
    if r == 1:
        for s in range(1, n_check + 1):
            shells[s] = [(s,)]
        return shells
    budget = dense_budget
    size = r
    while size <= n_check:
        states = _states_of_size(r, size)
        if len(states) > budget:
            break
        shells[size] = states
        budget -= len(states)
        size += 1
    if size <= n_check:
        ladder = np.unique(np.round(
            np.geomspace(size, n_check, 40)).astype(int))
        for s in ladder:
            shells[int(s)] = _shell_representatives(r, int(s))
    return shells


def _loglog_slope(sizes, values):
    """Least-squares slope of log(value) against log(size); None if unfit."""
    sizes = np.asarray(sizes, dtype=float)
    values = np.asarray(values, dtype=float)
    keep = (sizes > 0) & (values > 0)
    if keep.sum() < 2:
        return None
    return float(np.polyfit(np.log(sizes[keep]), np.log(values[keep]), 1)[0])


def _nondecreasing(values) -> bool:
    values = np.asarray(values, dtype=float)
    if len(values) < 2:
        return True
    prev = values[:-1]
    return bool(np.all(values[1:] >= prev - _MONOTONE_SLACK * np.abs(prev)))


def _nonincreasing(values) -> bool:
    return _nondecreasing(-np.asarray(values, dtype=float))


# ---------------------------------------------------------------------------
# reports
# ---------------------------------------------------------------------------

@dataclass
class AssumptionReport:
    """Outcome of one finite-range hypothesis check."""

    name: str
    verdict: str
    checked_range: int
    constants: dict = field(default_factory=dict)
    witness: tuple | None = None
    margins: dict = field(default_factory=dict)
    notes: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "verdict": self.verdict,
            "checked_range": self.checked_range,
            "constants": dict(self.constants),
            "witness": list(self.witness) if self.witness is not None else None,
            "margins": dict(self.margins),
            "notes": list(self.notes),
        }


@dataclass
class DriftReport:
    """Outcome of the potential-drift sweep.

    On a pass the sweep witnesses ``(L V)(n) <= offset - coercivity *
    |n|**exponent`` at every sampled state.
    """

    verdict: str
    eps: float
    exponent: float
    offset: float
    coercivity: float
    curve_sizes: np.ndarray
    curve_values: np.ndarray
    checked_range: int
    witness: tuple | None = None
    notes: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "name": "potential-drift",
            "verdict": self.verdict,
            "eps": self.eps,
            "exponent": self.exponent,
            "offset": self.offset,
            "coercivity": self.coercivity,
            "curve_sizes": [int(s) for s in self.curve_sizes],
            "curve_values": [float(v) for v in self.curve_values],
            "checked_range": self.checked_range,
            "witness": list(self.witness) if self.witness is not None else None,
            "notes": list(self.notes),
        }


@dataclass
class ConditionalDriftReport:
    """Outcome of the conditioned-moment inequality along a time grid."""

    verdict: str
    eps: float
    times: np.ndarray
    worst_margin: float
    quadrature_error: float
    smallest_constant: float
    notes: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "name": "conditional-drift",
            "verdict": self.verdict,
            "eps": self.eps,
            "t_max": float(self.times[-1]),
            "grid_points": int(len(self.times)),
            "worst_margin": self.worst_margin,
            "quadrature_error": self.quadrature_error,
            "smallest_constant": self.smallest_constant,
            "notes": list(self.notes),
        }


# ---------------------------------------------------------------------------
# rate-envelope check
# ---------------------------------------------------------------------------

def _declared_or_fitted_exponents(model, sizes, max_bd, min_cdiag, notes):
    """Resolve (beta1, beta2), fitting from top-decade shell curves if needed."""
    top = sizes >= sizes[-1] / 10.0
    beta1 = model.beta1
    if beta1 is None:
        slope = _loglog_slope(sizes[top], max_bd[top])
        beta1 = max(0.0, slope) if slope is not None else None
        if beta1 is not None:
            notes.append(f"beta1 fitted from the top decade: {beta1:.4g}")
    beta2 = model.beta2
    if beta2 is None:
        slope = _loglog_slope(sizes[top], min_cdiag[top])
        beta2 = -slope if slope is not None else None
        if beta2 is not None:
            notes.append(f"beta2 fitted from the top decade: {beta2:.4g}")
    return beta1, beta2


def check_growth_envelope(model: Model, n_check: int = 10000) -> AssumptionReport:
    """Power-law envelopes on per-capita rates, with witnessed constants.

    Verifies positivity of the rate coefficients at every sampled state,
    resolves the growth exponent of births/deaths and the decay exponent of
    self-competition (declared values win; otherwise fitted from the top
    decade), then tests the exponent arithmetic that keeps the death channel
    dominant: beta1 >= 0, beta2 < 1, beta1 + gamma*beta2 < gamma.
    """
    shells = sample_shells(model.r, n_check)
    sizes = np.array(sorted(shells), dtype=float)
    max_bd = np.empty(len(sizes))
    max_b = np.empty(len(sizes))
    max_d = np.empty(len(sizes))
    min_cdiag = np.empty(len(sizes))
    notes: list = []

    for k, s in enumerate(sorted(shells)):
        worst_bd = worst_b = worst_d = 0.0
        best_c = math.inf
        for n in shells[s]:
            b = np.asarray(model.birth(n), dtype=float)
            d = np.asarray(model.death(n), dtype=float)
            c = np.asarray(model.competition(n), dtype=float)
            diag = np.diag(c)
            if (b <= 0).any() or (d < 0).any() or (c < 0).any() or (diag <= 0).any():
                return AssumptionReport(
                    name="growth-envelope", verdict=FAIL, checked_range=n_check,
                    witness=n,
                    notes=["rate positivity fails: need b > 0, d >= 0, "
                           "c >= 0 with positive diagonal"])
            worst_b = max(worst_b, float(b.max()))
            worst_d = max(worst_d, float(d.max()))
            worst_bd = max(worst_bd, float(max(b.max(), d.max())))
            best_c = min(best_c, float(diag.min()))
        max_b[k], max_d[k] = worst_b, worst_d
        max_bd[k], min_cdiag[k] = worst_bd, best_c

    beta1, beta2 = _declared_or_fitted_exponents(
        model, sizes, max_bd, min_cdiag, notes)
    if beta1 is None or beta2 is None:
        return AssumptionReport(
            name="growth-envelope", verdict=INCONCLUSIVE, checked_range=n_check,
            notes=notes + ["could not resolve growth exponents from samples"])

    # Witnessed envelope constants on the sampled range.
    birth_bound = float(np.max(max_b / sizes ** beta1))
    death_bound = float(np.max(max_d / sizes ** beta1)) if max_d.max() > 0 else 0.0
    self_comp_lower = float(np.min(min_cdiag * sizes ** beta2))

    # Stability heuristic: with the resolved exponents the normalized curves
    # should be flat on the top half of the range.
    top = sizes >= sizes[-1] / 2.0
    drift_up = _loglog_slope(sizes[top], (max_bd / sizes ** beta1)[top])
    drift_dn = _loglog_slope(sizes[top], (min_cdiag * sizes ** beta2)[top])
    stable = True
    if drift_up is not None and drift_up > _FLAT_SLOPE:
        stable = False
        notes.append(f"birth/death envelope still grows like size^{drift_up:.3f} "
                     f"after removing size^{beta1:.3f}")
    if drift_dn is not None and drift_dn < -_FLAT_SLOPE:
        stable = False
        notes.append(f"self-competition keeps decaying like size^{drift_dn:.3f} "
                     f"after removing size^{-beta2:.3f}")

    margin = model.gamma - beta1 - model.gamma * beta2
    constants = {
        "beta1": float(beta1), "beta2": float(beta2),
        "birth_bound": birth_bound, "death_bound": death_bound,
        "self_competition_lower": self_comp_lower,
    }
    margins = {"exponent_margin": float(margin)}
    if beta1 < -1e-9 or beta2 >= 1.0 or margin <= 0:
        return AssumptionReport(
            name="growth-envelope", verdict=FAIL, checked_range=n_check,
            constants=constants, margins=margins,
            notes=notes + ["exponent arithmetic fails: need beta1 >= 0, "
                           "beta2 < 1 and beta1 + gamma*beta2 < gamma"])
    if not stable:
        return AssumptionReport(
            name="growth-envelope", verdict=INCONCLUSIVE, checked_range=n_check,
            constants=constants, margins=margins, notes=notes)
    return AssumptionReport(
        name="growth-envelope", verdict=PASS, checked_range=n_check,
        constants=constants, margins=margins, notes=notes)


# ---------------------------------------------------------------------------
# self-regulation vs cross-pressure
# ---------------------------------------------------------------------------

def check_competition_dominance(model: Model, n_check: int = 10000,
                                growth_threshold: float = 10.0) -> AssumptionReport:
    """Does self-competition outgrow cross-competition along every direction?

    Computes, per sampled state, ``min_i c_ii(n) / (sum of off-diagonal
    c_jk(n) + sum of diagonal c_jj(n)/|n|)`` and tracks the per-shell
    minimum.  Passes when the curve is nondecreasing on the top half of the
    range and clears ``growth_threshold`` at the far end; a flat curve is a
    failure with the minimizing state as witness; anything else is
    inconclusive.
    """
    shells = sample_shells(model.r, n_check)
    sizes = np.array(sorted(shells), dtype=float)
    curve = np.empty(len(sizes))
    minimizers = []
    for k, s in enumerate(sorted(shells)):
        worst = math.inf
        arg = None
        for n in shells[s]:
            c = np.asarray(model.competition(n), dtype=float)
            diag = np.diag(c)
            off = float(c.sum() - diag.sum())
            ratio = float(diag.min()) / (off + float(diag.sum()) / s)
            if ratio < worst:
                worst, arg = ratio, n
        curve[k] = worst
        minimizers.append(arg)

    top = sizes >= sizes[-1] / 2.0
    slope = _loglog_slope(sizes[top], curve[top])
    constants = {"ratio_at_range_end": float(curve[-1])}
    margins = {"top_half_slope": slope if slope is not None else float("nan")}
    if _nondecreasing(curve[top]) and curve[-1] >= growth_threshold:
        return AssumptionReport(
            name="competition-dominance", verdict=PASS, checked_range=n_check,
            constants=constants, margins=margins)
    if slope is not None and slope < _FLAT_SLOPE:
        return AssumptionReport(
            name="competition-dominance", verdict=FAIL, checked_range=n_check,
            constants=constants, margins=margins, witness=minimizers[-1],
            notes=["dominance ratio stays bounded over the sampled range"])
    return AssumptionReport(
        name="competition-dominance", verdict=INCONCLUSIVE,
        checked_range=n_check, constants=constants, margins=margins,
        notes=["ratio grows but has not cleared the threshold on this range"])


# ---------------------------------------------------------------------------
# pressure near one-individual edges
# ---------------------------------------------------------------------------

def check_boundary_pressure(model: Model, n_check: int = 10000,
                            comparison_coef: float | None = None,
                            growth_threshold: float = 10.0) -> AssumptionReport:
    """Bulk competition pressure must dominate edge pressure, and grow.

    Splits each state's types into the bulk (count above one) and the edge
    (count exactly one).  Two clauses: the size-weighted bulk pressure must
    be at least ``comparison_coef`` times the edge pressure from some shell
    on (default coefficient ``r**-(1+gamma)``), and the bulk pressure itself
    must dominate ``|n|**max(beta1, gamma)`` with the same growth semantics
    as the dominance check.
    """
    if comparison_coef is None:
        comparison_coef = float(model.r) ** -(1.0 + model.gamma)
    beta1 = model.beta1
    if beta1 is None:
        beta1 = 0.0
    target = max(beta1, model.gamma)

    shells = sample_shells(model.r, n_check)
    ordered = sorted(shells)
    sizes = np.array(ordered, dtype=float)
    bulk_curve = np.full(len(sizes), math.inf)
    bulk_arg = [None] * len(sizes)
    last_violation_size = None
    last_violation_state = None
    gamma = model.gamma

    for k, s in enumerate(ordered):
        for n in shells[s]:
            arr = np.asarray(n, dtype=float)
            press = np.asarray(model.competition(n), dtype=float) @ arr
            powered = press ** gamma
            edge = np.asarray(n) == 1
            lhs = float(np.sum((arr[~edge] / s) * powered[~edge]))
            rhs = float(np.sum(powered[edge]))
            if lhs < comparison_coef * rhs:
                last_violation_size = s
                last_violation_state = n
            scaled = lhs / s ** target
            if scaled < bulk_curve[k]:
                bulk_curve[k] = scaled
                bulk_arg[k] = n

    # Clause 1: the comparison holds from some shell onward.
    if last_violation_size is None:
        clean_from = ordered[0]
    else:
        later = [s for s in ordered if s > last_violation_size]
        clean_from = later[0] if later else None
    notes = []
    constants = {"comparison_coef": float(comparison_coef),
                 "exponent_target": float(target)}
    if clean_from is None or clean_from > n_check / 2:
        return AssumptionReport(
            name="boundary-pressure", verdict=FAIL, checked_range=n_check,
            constants=constants, witness=last_violation_state,
            notes=["edge pressure still beats bulk pressure in the top half "
                   "of the range"])
    constants["clean_from_size"] = int(clean_from)

    # Clause 2: growth of the scaled bulk pressure.
    top = sizes >= sizes[-1] / 2.0
    slope = _loglog_slope(sizes[top], bulk_curve[top])
    constants["scaled_pressure_at_range_end"] = float(bulk_curve[-1])
    margins = {"top_half_slope": slope if slope is not None else float("nan")}
    if _nondecreasing(bulk_curve[top]) and bulk_curve[-1] >= growth_threshold:
        return AssumptionReport(
            name="boundary-pressure", verdict=PASS, checked_range=n_check,
            constants=constants, margins=margins, notes=notes)
    if slope is not None and slope < _FLAT_SLOPE:
        return AssumptionReport(
            name="boundary-pressure", verdict=FAIL, checked_range=n_check,
            constants=constants, margins=margins, witness=bulk_arg[-1],
            notes=["scaled bulk pressure stays bounded over the sampled "
                   "range"])
    return AssumptionReport(
        name="boundary-pressure", verdict=INCONCLUSIVE, checked_range=n_check,
        constants=constants, margins=margins,
        notes=["bulk pressure grows but has not cleared the threshold"])


# ---------------------------------------------------------------------------
# fully symmetric models: explicit coexistence threshold
# ---------------------------------------------------------------------------

def check_neutral_threshold(model: Model | None = None, r: int | None = None,
                            gamma: float | None = None,
                            grid_size: int = 600) -> AssumptionReport:
    """Coexistence threshold for exchangeable competition: r < 1 + e*gamma.

    With all competition entries equal, coexistence of ``r`` types holds
    exactly when ``r < 1 + e*gamma``.  Beyond the arithmetic test this
    searches a geometric grid of potential exponents for a constructive
    margin ``delta > 0`` with ``(r-1)/gamma * (1 - eps/gamma)**(gamma/eps -
    1) <= 1 - delta``, and re-verifies the winning pair exactly in floating
    point before reporting it.
    """
    notes: list = []
    if model is not None:
        r = model.r if r is None else r
        gamma = model.gamma if gamma is None else gamma
        flat = np.asarray(model.c_coef, dtype=float) if model.c_coef is not None else None
        if model.family != "constant" or flat is None or not (flat == flat.flat[0]).all():
            return AssumptionReport(
                name="neutral-threshold", verdict=INCONCLUSIVE,
                checked_range=0,
                notes=["competition is not exchangeable (constant and equal "
                       "across all pairs), so the threshold does not apply"])
    if r is None or gamma is None:
        raise ValidationError("need either a model or explicit r and gamma")
    if r < 1 or gamma <= 0:
        raise ValidationError(f"need r >= 1 and gamma > 0, got {r}, {gamma}")

    threshold = 1.0 + math.e * gamma
    arithmetic = r < threshold
    constants = {"threshold": threshold, "types": int(r), "gamma": float(gamma)}
    margins = {"threshold_margin": float(threshold - r)}

    best_eps = None
    best_factor = math.inf
    for x in np.geomspace(1e-4, 0.999, grid_size):
        factor = (r - 1) / gamma * math.exp((1.0 - x) / x * math.log1p(-x))
        if factor < best_factor:
            best_factor = factor
            best_eps = x * gamma
    found = best_factor < 1.0
    best_delta = None
    if found:
        # Derive the reported margin from the same float expression that the
        # re-verification uses, so the certificate is self-consistent.
        eps = best_eps
        lhs = (r - 1) / gamma * (1.0 - eps / gamma) ** (gamma / eps - 1.0)
        best_delta = (1.0 - lhs) * (1.0 - 1e-9)
        found = best_delta > 0 and lhs <= 1.0 - best_delta
        if best_factor < 1.0 and not found:
            raise NumericalError("threshold certificate failed re-verification")
    if found:
        constants["eps"] = float(best_eps)
        constants["delta"] = float(best_delta)

    if arithmetic and found:
        verdict = PASS
    elif not arithmetic:
        verdict = FAIL
        notes.append(f"{r} types is at or above the threshold {threshold:.6f}")
    else:
        verdict = INCONCLUSIVE
        notes.append("below the threshold but no constructive margin found "
                     "on the exponent grid")
    return AssumptionReport(
        name="neutral-threshold", verdict=verdict, checked_range=grid_size,
        constants=constants, margins=margins, notes=notes)


# ---------------------------------------------------------------------------
# potential drift sweep
# ---------------------------------------------------------------------------

def check_drift(model: Model, eps: float, n_check: int = 10000) -> DriftReport:
    """Sweep the generator applied to the bounded potential over shells.

    Tracks the per-shell worst value of ``(L V)(n)``, requires it to be
    negative from the middle of the range on, fits the coercive decay rate
    against ``|n|**(gamma - eps - gamma*beta2)`` on the top decade, and
    re-verifies the witnessed affine bound at every sampled state before
    reporting it.
    """
    beta2 = model.beta2 if model.beta2 is not None else 0.0
    high = model.gamma * (1.0 - beta2)
    if not 0.0 < eps < high:
        raise DomainError(f"eps {eps} outside the admissible window (0, {high})")
    exponent = model.gamma - eps - model.gamma * beta2

    litter_slack = 8
    if model.litter is not None:
        bound = model.litter.mean_total_size()
        if bound is not None:
            litter_slack = max(litter_slack, int(math.ceil(bound)) * 4)
    _potential_table(eps, n_check + litter_slack + 2)
    potential = lambda n: size_potential(n, eps)

    shells = sample_shells(model.r, n_check)
    ordered = sorted(shells)
    sizes = np.array(ordered, dtype=float)
    curve = np.empty(len(sizes))
    argmax = [None] * len(sizes)
    for k, s in enumerate(ordered):
        worst = -math.inf
        for n in shells[s]:
            value = apply_generator(model, potential, n)
            if value > worst:
                worst = value
                argmax[k] = n
        curve[k] = worst

    notes: list = []
    # Eventually negative on the range?
    positive = np.nonzero(curve >= 0)[0]
    if len(positive) and sizes[positive[-1]] > n_check / 2:
        return DriftReport(
            verdict=FAIL, eps=eps, exponent=exponent, offset=math.nan,
            coercivity=math.nan, curve_sizes=sizes, curve_values=curve,
            checked_range=n_check, witness=argmax[positive[-1]],
            notes=["generator applied to the potential is not eventually "
                   "negative on the range"])

    top = sizes >= sizes[-1] / 10.0
    u = sizes[top] ** exponent
    slope = float(np.polyfit(u, curve[top], 1)[0])
    if slope >= 0:
        return DriftReport(
            verdict=FAIL, eps=eps, exponent=exponent, offset=math.nan,
            coercivity=math.nan, curve_sizes=sizes, curve_values=curve,
            checked_range=n_check, witness=argmax[-1],
            notes=["no coercive decay: the drift curve does not fall like "
                   f"size^{exponent:.4g} on the top decade"])
    coercivity = -slope / 2.0
    offset = float(np.max(curve + coercivity * sizes ** exponent))
    if offset <= 0:
        notes.append("drift is negative over the whole range; offset clipped "
                     "to a nominal positive value")
        offset = 1e-12
    # Re-verify the affine bound exactly as reported.
    recheck = curve + coercivity * sizes ** exponent
    if not (recheck <= offset).all():
        raise NumericalError("drift bound failed re-verification")
    return DriftReport(
        verdict=PASS, eps=eps, exponent=exponent, offset=offset,
        coercivity=coercivity, curve_sizes=sizes, curve_values=curve,
        checked_range=n_check, notes=notes)


# ---------------------------------------------------------------------------
# conditioned-moment inequality along a semigroup trajectory
# ---------------------------------------------------------------------------

def check_conditional_drift(model: Model, space, times, laws,
                            eps: float) -> ConditionalDriftReport:
    """Integral form of the drift under conditioning on survival.

    Given conditional laws ``laws[k]`` at uniform grid ``times[k]`` on a
    truncated space, verifies for every k that

        mean of V at t_k - mean of V at t_0
            <= integral of [mean of LV - mean of V * mean of (L 1)] ds

    via the trapezoid rule, with the quadrature error estimated by
    half-grid comparison.  The right side evaluates the full generator
    (moves leaving the truncated space count), which makes the inequality
    conservative rather than tight.  Also reports the smallest constant C
    that would make the one-sided version with additive slack C + C**2
    hold at every grid point.
    """
    times = np.asarray(times, dtype=float)
    if times.ndim != 1 or len(times) < 3:
        raise DomainError("need a 1-d grid with at least 3 points")
    steps = np.diff(times)
    if (steps <= 0).any() or not np.allclose(steps, steps[0], rtol=1e-9):
        raise DomainError("times must be a uniform increasing grid")
    laws = np.asarray(laws, dtype=float)
    if laws.shape != (len(times), len(space.states)):
        raise DomainError(f"laws must have shape {(len(times), len(space.states))}")

    bound = 1.0 + 1.0 / eps
    potential = lambda n: size_potential(n, eps)
    v = np.array([size_potential(n, eps) for n in space.states])
    drift = np.empty(len(space.states))
    kill = np.empty(len(space.states))
    for i, n in enumerate(space.states):
        drift[i] = apply_generator(model, potential, n)
        targets, rates, _ = model.transition_table(n)
        dead = 0.0
        for target, rate in zip(targets, rates):
            if is_absorbed(target):
                dead += rate
        kill[i] = -dead

    mean_v = laws @ v
    mean_drift = laws @ drift
    mean_kill = laws @ kill
    integrand = mean_drift - mean_v * mean_kill

    h = float(steps[0])
    cumulative = np.concatenate(
        ([0.0], np.cumsum((integrand[1:] + integrand[:-1]) * (h / 2.0))))
    lhs = mean_v - mean_v[0]
    margin = cumulative - lhs
    worst = float(margin[1:].min())

    # Half-grid comparison on the even points.
    even = np.arange(0, len(times), 2)
    coarse = integrand[even]
    coarse_cum = np.concatenate(
        ([0.0], np.cumsum((coarse[1:] + coarse[:-1]) * h)))
    quad = float(np.max(np.abs(cumulative[even] - coarse_cum)) / 3.0)

    # The half-grid estimate is only trustworthy when the grid resolves the
    # integrand; a jump of a quarter of its scale within one step means both
    # grids alias the same transient.
    scale = float(np.max(np.abs(integrand)))
    step_change = float(np.max(np.abs(np.diff(integrand)))) if len(integrand) > 1 else 0.0
    resolved = scale == 0.0 or step_change <= 0.25 * scale

    # Smallest constant making the slack form hold pointwise in time.
    gap = mean_drift - mean_v * mean_kill
    need = np.maximum(-gap, 0.0)
    smallest = float(np.max((1.0 + np.sqrt(1.0 + 4.0 * need)) / 2.0))

    notes = [
        f"potential values lie in [1, {bound:.6g}]; the additive bound uses "
        "the full supremum 1 + 1/eps (a tail-only bound of 1/eps is not "
        "safe because the potential counts its first term)",
        "the drift side evaluates every move of the untruncated chain, so "
        "truncation leakage only widens the margin",
    ]
    band = _QUAD_SAFETY * quad
    if not resolved:
        verdict = INCONCLUSIVE
        notes.append("grid under-resolves the drift transient (the integrand "
                     "jumps within single steps); refine the grid")
    elif worst > band:
        verdict = PASS
    elif worst < -band:
        verdict = FAIL
    else:
        verdict = INCONCLUSIVE
        notes.append("margin within quadrature error; refine the grid")
    return ConditionalDriftReport(
        verdict=verdict, eps=eps, times=times, worst_margin=worst,
        quadrature_error=quad, smallest_constant=smallest, notes=notes)


# ---------------------------------------------------------------------------
# catastrophe smallness
# ---------------------------------------------------------------------------

def check_catastrophes(model: Model, n_check: int = 10000,
                       decay_threshold: float = 0.1) -> AssumptionReport:
    """Total-loss rates must stay below the quadratic death channel.

    One type: searches for a cutoff size n0 and constants with
    ``death(n) >= c_low * n**2`` and ``catastrophe(n) <= delta * c_low * n``
    with ``delta < 1`` beyond the cutoff.  Several types: tracks the ratio
    of the catastrophe rate to ``min_i c_ii(n) * |n|**gamma`` per shell and
    requires clear decay.
    """
    if model.catastrophe is None:
        return AssumptionReport(
            name="catastrophe-smallness", verdict=PASS, checked_range=n_check,
            constants={"delta": 0.0},
            notes=["no catastrophe channel declared; the zero rate "
                   "satisfies every smallness bound"])

    if model.r == 1:
        ns = np.arange(1, n_check + 1, dtype=float)
        birth_total = np.empty(n_check)
        death_total = np.empty(n_check)
        loss = np.empty(n_check)
        for i, n in enumerate(ns):
            state = (int(n),)
            birth_total[i] = n * float(np.asarray(model.birth(state))[0])
            d = float(np.asarray(model.death(state))[0])
            c = float(np.asarray(model.competition(state))[0, 0])
            death_total[i] = n * (d + (c * n) ** model.gamma)
            loss[i] = float(model.catastrophe(state))
        birth_bound = float(np.max(birth_total / ns))

        # Suffix envelopes: death_floor[i] = min over n >= i of death/n^2.
        death_floor = np.minimum.accumulate((death_total / ns ** 2)[::-1])[::-1]
        cutoff = 1
        while cutoff <= n_check // 2:
            i = cutoff - 1
            c_low = float(death_floor[i])
            if c_low > 0:
                delta = float(np.max((loss[i:] / ns[i:]) / c_low))
                if delta < 1.0:
                    return AssumptionReport(
                        name="catastrophe-smallness", verdict=PASS,
                        checked_range=n_check,
                        constants={"cutoff": int(cutoff), "delta": delta,
                                   "death_quadratic_lower": c_low,
                                   "birth_linear_upper": birth_bound},
                        margins={"delta_slack": 1.0 - delta})
            cutoff *= 2
        i = np.argmax(loss / (ns * death_floor))
        return AssumptionReport(
            name="catastrophe-smallness", verdict=FAIL, checked_range=n_check,
            witness=(int(ns[i]),),
            constants={"best_delta": float((loss / (ns * death_floor))[i]),
                       "birth_linear_upper": birth_bound},
            notes=["total-loss rate is not dominated by the quadratic death "
                   "channel with any margin below one"])

    shells = sample_shells(model.r, n_check)
    ordered = sorted(shells)
    sizes = np.array(ordered, dtype=float)
    curve = np.empty(len(sizes))
    argmax = [None] * len(sizes)
    for k, s in enumerate(ordered):
        worst = -math.inf
        for n in shells[s]:
            c = np.asarray(model.competition(n), dtype=float)
            ratio = float(model.catastrophe(n)) / (
                float(np.diag(c).min()) * s ** model.gamma)
            if ratio > worst:
                worst, argmax[k] = ratio, n
        curve[k] = worst

    top = sizes >= sizes[-1] / 2.0
    slope = _loglog_slope(sizes[top], curve[top])
    constants = {"ratio_at_range_end": float(curve[-1])}
    margins = {"top_half_slope": slope if slope is not None else float("nan")}
    if curve[-1] <= decay_threshold and (
            slope is None or slope <= -_FLAT_SLOPE or curve[-1] == 0.0):
        return AssumptionReport(
            name="catastrophe-smallness", verdict=PASS, checked_range=n_check,
            constants=constants, margins=margins)
    if slope is not None and slope > -_FLAT_SLOPE and curve[-1] > decay_threshold:
        return AssumptionReport(
            name="catastrophe-smallness", verdict=FAIL, checked_range=n_check,
            constants=constants, margins=margins, witness=argmax[-1],
            notes=["loss-to-competition ratio does not decay on the range"])
    return AssumptionReport(
        name="catastrophe-smallness", verdict=INCONCLUSIVE,
        checked_range=n_check, constants=constants, margins=margins,
        notes=["ratio is small but its decay is not clear on this range"])


# ---------------------------------------------------------------------------
# litter-size moments
# ---------------------------------------------------------------------------

def check_multibirth(model: Model) -> AssumptionReport:
    """Mean litter size must be finite and witnessed.

    Fixed litter laws get an exact mean; state-dependent laws pass only with
    a declared bound, and are inconclusive without one.
    """
    litter = model.litter
    if litter is None:
        return AssumptionReport(
            name="litter-moments", verdict=PASS, checked_range=0,
            constants={"mean_total_size": 1.0},
            notes=["single-progeny births; every litter has size one"])
    mean = litter.mean_total_size()
    if mean is not None:
        source = ("declared mean bound" if litter.state_dependent()
                  else "exact mean of the fixed law")
        return AssumptionReport(
            name="litter-moments", verdict=PASS, checked_range=0,
            constants={"mean_total_size": float(mean)}, notes=[source])
    return AssumptionReport(
        name="litter-moments", verdict=INCONCLUSIVE, checked_range=0,
        notes=["state-dependent litter law with no declared mean bound"])
