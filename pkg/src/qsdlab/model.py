"""Multi-type competitive birth-death models on the positive lattice.

A population of ``r`` interacting types lives on Z_+^r.  From an interior
state ``n`` (all coordinates >= 1) type ``j`` gives birth at per-capita rate
``b_j(n)`` and dies at per-capita rate ``d_j(n) + (sum_k c_jk(n) n_k)^gamma``,
so the chain jumps ``n -> n + e_j`` at rate ``n_j b_j(n)`` and ``n -> n - e_j``
at rate ``n_j [d_j(n) + (sum_k c_jk(n) n_k)^gamma]``.  The boundary where any
coordinate is zero is absorbing: once a type is gone the process is dead for
the purposes of every downstream computation.

Two optional extensions widen the class: a catastrophe intensity ``a(n)``
that sends the whole population to the boundary in one jump, and multi-progeny
births where a reproduction event of any type adds a litter vector ``k`` drawn
from a state-dependent law ``p_n``.

Rate functions are never evaluated on the boundary; every operation below the
solver collapses boundary targets to a single canonical absorbed marker
(the all-zero state) while simulation records the literal exit state.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, NamedTuple

import numpy as np

from .config import ConfigDocument
from .errors import DomainError, RateOverflowError, ValidationError

State = tuple
#: Litter laws and worked examples index types by these tuples of ints.


class Transition(NamedTuple):
    """One jump of the chain: where it goes and at what rate."""

    target: State
    rate: float


def is_interior(n: State) -> bool:
    return all(x >= 1 for x in n)


def is_absorbed(n: State) -> bool:
    """True iff some coordinate equals zero (the state lies on the boundary)."""
    return any(x == 0 for x in n)


def absorbed_marker(r: int) -> State:
    """Canonical representative of the absorbing boundary."""
    return (0,) * r


@dataclass(frozen=True, eq=False)
class LitterLaw:
    """Distribution of the litter vector added by one birth event.

    ``table`` is either a fixed mapping ``k -> probability`` or a callable
    ``n -> mapping`` for state-dependent laws.  Fixed tables are validated and
    frozen in lexicographic key order at construction; callable tables are
    validated each time they are queried.  ``declared_mean_bound`` is an upper
    bound on sup_n sum_k |k| p_{n,k}, needed by the bounded-litter check when
    the table is state-dependent.
    """

    table: object
    declared_mean_bound: float | None = None

    def __post_init__(self):
        if not callable(self.table):
            entries = _validated_litter_entries(dict(self.table))
            object.__setattr__(self, "table", None)
            object.__setattr__(self, "_entries", entries)
        else:
            object.__setattr__(self, "_entries", None)
            object.__setattr__(self, "_callable", self.table)

    def entries_for(self, n: State):
        """Sorted ``(k, probability)`` pairs of the law at state ``n``."""
        if self._entries is not None:
            return self._entries
        return _validated_litter_entries(dict(self._callable(n)))

    def state_dependent(self) -> bool:
        return self._entries is None

    def mean_total_size(self) -> float | None:
        """sup_n of the expected litter size, when it is known.

        Exact for fixed tables; the declared bound for state-dependent ones;
        ``None`` when nothing was declared.
        """
        if self._entries is not None:
            return sum(p * sum(k) for k, p in self._entries)
        return self.declared_mean_bound


def _validated_litter_entries(mapping):
    entries = []
    total = 0.0
    for k in sorted(mapping):
        p = float(mapping[k])
        if p < 0:
            raise ValidationError(f"litter probability for {k} is negative")
        if any(x < 0 for x in k):
            raise ValidationError(f"litter vector {k} has a negative entry")
        if sum(k) < 1:
            raise ValidationError(
                f"litter vector {k} adds no individual; births must move the state")
        if p > 0.0:
            entries.append((tuple(int(x) for x in k), p))
        total += p
    if abs(total - 1.0) > 1e-12:
        raise ValidationError(
            f"litter probabilities sum to {total!r}, expected 1 within 1e-12")
    return tuple(entries)


@dataclass(frozen=True, eq=False)
class Model:
    """Immutable bundle of rate functions plus declared envelope exponents.

    ``birth``/``death`` map an interior state to the length-``r`` vector of
    per-capita coefficients; ``competition`` maps it to the full ``r x r``
    interaction matrix.  ``beta1``/``beta2`` are the optional growth/decay
    exponents used by the hypothesis checkers.  ``family`` records how the
    model was built ("constant", "power-law", "tabulated" or "callback") and
    the ``*_coef`` fields keep the raw coefficient data when it exists, so
    structural checks can inspect it exactly.
    """

    r: int
    gamma: float
    birth: Callable
    death: Callable
    competition: Callable
    family: str = "callback"
    beta1: float | None = None
    beta2: float | None = None
    catastrophe: Callable | None = None
    litter: LitterLaw | None = None
    validate_rates: bool = True
    b_coef: np.ndarray | None = field(default=None, repr=False)
    d_coef: np.ndarray | None = field(default=None, repr=False)
    c_coef: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.r < 1:
            raise ValidationError(f"r must be >= 1, got {self.r}")
        if not (self.gamma > 0 and math.isfinite(self.gamma)):
            raise ValidationError(f"gamma must be a finite positive number, got {self.gamma}")
        if self.litter is not None and not isinstance(self.litter, LitterLaw):
            object.__setattr__(self, "litter", LitterLaw(self.litter))
        if self.beta1 is not None and self.beta1 < 0:
            raise ValidationError(f"beta1 must be >= 0, got {self.beta1}")
        if self.beta2 is not None and not self.beta2 < 1:
            raise ValidationError(f"beta2 must be < 1, got {self.beta2}")

    # -- constructors ------------------------------------------------------

    @classmethod
    def constant(cls, b, d, c, gamma, catastrophe=None, litter=None):
        """Constant-coefficient model; rates depend on n only through the jumps."""
        b = _coef_vector("b", b)
        d = _coef_vector("d", d)
        c = _coef_matrix("c", c, len(b))
        if len(d) != len(b):
            raise ValidationError(f"b has {len(b)} types but d has {len(d)}")
        _require_positive_diag(b, c)
        bv, dv, cm = b.copy(), d.copy(), c.copy()
        return cls(r=len(b), gamma=float(gamma),
                   birth=lambda n: bv, death=lambda n: dv, competition=lambda n: cm,
                   family="constant", beta1=0.0, beta2=0.0,
                   catastrophe=catastrophe, litter=litter,
                   b_coef=bv, d_coef=dv, c_coef=cm)

    @classmethod
    def power_law(cls, b, d, c, gamma, beta1, beta2, catastrophe=None, litter=None):
        """Scaled family: b_i(n) = b_i |n|^beta1, d likewise, c_ij(n) = c_ij |n|^-beta2."""
        b = _coef_vector("b", b)
        d = _coef_vector("d", d)
        c = _coef_matrix("c", c, len(b))
        _require_positive_diag(b, c)
        beta1 = float(beta1)
        beta2 = float(beta2)
        bv, dv, cm = b.copy(), d.copy(), c.copy()

        def birth(n):
            return bv * float(sum(n)) ** beta1

        def death(n):
            return dv * float(sum(n)) ** beta1

        def competition(n):
            return cm * float(sum(n)) ** -beta2

        return cls(r=len(b), gamma=float(gamma), birth=birth, death=death,
                   competition=competition, family="power-law",
                   beta1=beta1, beta2=beta2, catastrophe=catastrophe, litter=litter,
                   b_coef=bv, d_coef=dv, c_coef=cm)

    @classmethod
    def tabulated(cls, b_table, d_table, c_table, gamma,
                  catastrophe=None, litter=None, beta1=None, beta2=None):
        """Rates tabulated on a box; lookups clamp to the box edge beyond it.

        ``b_table``/``d_table`` have shape ``box + (r,)`` and ``c_table`` has
        shape ``box + (r, r)``, where ``box`` gives the tabulated extent of
        each coordinate starting from 1.
        """
        b_table = np.asarray(b_table, dtype=float)
        d_table = np.asarray(d_table, dtype=float)
        c_table = np.asarray(c_table, dtype=float)
        r = b_table.shape[-1]
        box = b_table.shape[:-1]
        if len(box) != r:
            raise ValidationError(
                f"b_table shape {b_table.shape} is not box + (r,) for r = {r}")
        if d_table.shape != b_table.shape:
            raise ValidationError("d_table shape differs from b_table")
        if c_table.shape != box + (r, r):
            raise ValidationError(
                f"c_table shape {c_table.shape}, expected {box + (r, r)}")
        if not (b_table > 0).all():
            raise ValidationError("tabulated b must be positive everywhere")
        if (d_table < 0).any() or (c_table < 0).any():
            raise ValidationError("tabulated d and c must be nonnegative")
        diag = c_table.reshape(-1, r, r)[:, np.arange(r), np.arange(r)]
        if not (diag > 0).all():
            raise ValidationError("tabulated c must have positive diagonal everywhere")

        def clamp(n):
            return tuple(min(n[i], box[i]) - 1 for i in range(r))

        return cls(r=r, gamma=float(gamma),
                   birth=lambda n: b_table[clamp(n)],
                   death=lambda n: d_table[clamp(n)],
                   competition=lambda n: c_table[clamp(n)],
                   family="tabulated", beta1=beta1, beta2=beta2,
                   catastrophe=catastrophe, litter=litter)

    @classmethod
    def from_callbacks(cls, r, gamma, birth, death, competition,
                       beta1=None, beta2=None, catastrophe=None, litter=None,
                       validate=True):
        """Fully general model from user-supplied rate callables.

        Each callable receives the state as a tuple of ints: ``birth`` and
        ``death`` return r per-capita rates, ``competition`` an r-by-r
        matrix, ``catastrophe`` a single rate.  With ``validate=False`` the
        per-query positivity checks are waived; that exists for test
        scaffolding and deliberately broken inputs, not for production use.
        """
        return cls(r=r, gamma=float(gamma), birth=birth, death=death,
                   competition=competition, family="callback",
                   beta1=beta1, beta2=beta2, catastrophe=catastrophe,
                   litter=litter, validate_rates=validate)

    # -- rate enumeration --------------------------------------------------

    @cached_property
    def _kernel(self):
        if self.family == "constant" and self.catastrophe is None and self.litter is None:
            return _constant_kernel(self)
        return _generic_kernel(self)

    def transition_table(self, n):
        """Raw ``(targets, rates, total)`` of all nonzero moves out of ``n``.

        The enumeration order is canonical and frozen: births for j = 1..r
        (one move per litter vector, in the law's sorted order, under
        multi-progeny reproduction), then deaths for j = 1..r, then the
        catastrophe move.  ``total`` is the sum of ``rates`` in exactly that
        order.
        """
        return self._kernel(n)


def _coef_vector(name, values):
    arr = np.asarray(values, dtype=float)
    if arr.ndim != 1 or arr.size < 1:
        raise ValidationError(f"{name} must be a non-empty vector")
    if not np.isfinite(arr).all():
        raise ValidationError(f"{name} has non-finite entries")
    if (arr < 0).any():
        raise ValidationError(f"{name} has negative entries")
    return arr


def _coef_matrix(name, values, r):
    arr = np.asarray(values, dtype=float)
    if arr.shape != (r, r):
        raise ValidationError(f"{name} must be an {r}x{r} matrix, got shape {arr.shape}")
    if not np.isfinite(arr).all():
        raise ValidationError(f"{name} has non-finite entries")
    if (arr < 0).any():
        raise ValidationError(f"{name} has negative entries")
    return arr


def _require_positive_diag(b, c):
    if not (b > 0).all():
        raise ValidationError("every b_i must be > 0 (otherwise births stop cold)")
    if not (np.diag(c) > 0).all():
        raise ValidationError("every c_ii must be > 0 (self-competition keeps the "
                              "chain irreducible on the truncated space)")


def _constant_kernel(model):
    # Pure-float hot path: simulation spends nearly all of its time here.
    r = model.r
    gamma = model.gamma
    b = [float(x) for x in model.b_coef]
    d = [float(x) for x in model.d_coef]
    c = [[float(x) for x in row] for row in model.c_coef]
    types = range(r)

    def kernel(n):
        targets = []
        rates = []
        total = 0.0
        for j in types:
            nj = n[j]
            rate = nj * b[j]
            if rate > 0.0:
                targets.append(n[:j] + (nj + 1,) + n[j + 1:])
                rates.append(rate)
                total += rate
        for j in types:
            nj = n[j]
            cj = c[j]
            press = 0.0
            for k in types:
                press += cj[k] * n[k]
            rate = nj * (d[j] + press ** gamma)
            if rate > 0.0:
                targets.append(n[:j] + (nj - 1,) + n[j + 1:])
                rates.append(rate)
                total += rate
        if not total < math.inf:
            raise RateOverflowError(f"total rate out of state {n} is not finite")
        return targets, rates, total

    return kernel


def _generic_kernel(model):
    r = model.r
    gamma = model.gamma
    validate = model.validate_rates and model.family in ("callback",)
    marker = absorbed_marker(r)
    types = range(r)

    def kernel(n):
        bvec = np.asarray(model.birth(n), dtype=float)
        dvec = np.asarray(model.death(n), dtype=float)
        cmat = np.asarray(model.competition(n), dtype=float)
        if validate:
            if not (bvec > 0).all():
                raise ValidationError(f"b(n) must be positive at interior {n}")
            if (dvec < 0).any() or (cmat < 0).any():
                raise ValidationError(f"d(n) and c(n) must be nonnegative at {n}")
            if not (np.diag(cmat) > 0).all():
                raise ValidationError(f"c_ii(n) must be positive at interior {n}")
        press = cmat @ np.asarray(n, dtype=float)

        targets = []
        rates = []
        total = 0.0
        litter = model.litter.entries_for(n) if model.litter is not None else None
        for j in types:
            nj = n[j]
            base = nj * float(bvec[j])
            if base <= 0.0:
                continue
            if litter is None:
                targets.append(n[:j] + (nj + 1,) + n[j + 1:])
                rates.append(base)
                total += base
            else:
                for k, p in litter:
                    rate = base * p
                    targets.append(tuple(n[i] + k[i] for i in types))
                    rates.append(rate)
                    total += rate
        for j in types:
            nj = n[j]
            rate = nj * (float(dvec[j]) + float(press[j]) ** gamma)
            if rate > 0.0:
                targets.append(n[:j] + (nj - 1,) + n[j + 1:])
                rates.append(rate)
                total += rate
        if model.catastrophe is not None:
            rate = float(model.catastrophe(n))
            if rate < 0:
                raise ValidationError(f"catastrophe rate a({n}) = {rate} is negative")
            if rate > 0.0:
                targets.append(marker)
                rates.append(rate)
                total += rate
        if not total < math.inf:
            raise RateOverflowError(f"total rate out of state {n} is not finite")
        return targets, rates, total

    return kernel


def transitions(model: Model, n: State) -> list:
    """All nonzero-rate moves of the generator out of interior state ``n``.

    Deaths land on the literal neighbouring state even when that state lies on
    the absorbing boundary; catastrophe moves land on the canonical absorbed
    marker.  Calling this twice on the same inputs yields identical lists.
    """
    if not is_interior(n):
        raise DomainError(f"transitions undefined outside the interior: {n}")
    if len(n) != model.r:
        raise DomainError(f"state {n} has {len(n)} coordinates, model has r = {model.r}")
    targets, rates, _ = model.transition_table(n)
    return [Transition(t, rho) for t, rho in zip(targets, rates)]


def total_rate(model: Model, n: State) -> float:
    """Total jump intensity out of ``n``; the exact enumeration-order sum."""
    if not is_interior(n):
        raise DomainError(f"total_rate undefined outside the interior: {n}")
    return model.transition_table(n)[2]


def build_model(config: ConfigDocument) -> Model:
    """Construct the model described by a validated configuration document."""
    catastrophe = _catastrophe_from_config(config.catastrophe)
    litter = LitterLaw(config.multibirth) if config.multibirth else None
    if config.family == "constant":
        model = Model.constant(config.b, config.d, config.c, config.gamma,
                               catastrophe=catastrophe, litter=litter)
        if config.beta1 is not None or config.beta2 is not None:
            model = Model(r=model.r, gamma=model.gamma, birth=model.birth,
                          death=model.death, competition=model.competition,
                          family="constant",
                          beta1=config.beta1 if config.beta1 is not None else 0.0,
                          beta2=config.beta2 if config.beta2 is not None else 0.0,
                          catastrophe=catastrophe, litter=litter,
                          b_coef=model.b_coef, d_coef=model.d_coef,
                          c_coef=model.c_coef)
        return model
    if config.family == "power-law":
        return Model.power_law(config.b, config.d, config.c, config.gamma,
                               config.beta1, config.beta2,
                               catastrophe=catastrophe, litter=litter)
    # tabulated, r = 1 (the config loader enforces r == 1 for this family)
    length = len(config.b_table)
    b_table = np.asarray(config.b_table, dtype=float).reshape(length, 1)
    d_table = np.asarray(config.d_table, dtype=float).reshape(length, 1)
    c_table = np.asarray(config.c_table, dtype=float).reshape(length, 1, 1)
    return Model.tabulated(b_table, d_table, c_table, config.gamma,
                           catastrophe=catastrophe, litter=litter,
                           beta1=config.beta1, beta2=config.beta2)


def _catastrophe_from_config(spec):
    if spec is None:
        return None
    kind = spec[0]
    coef = spec[1]
    if kind == "constant":
        return lambda n: coef
    if kind == "linear":
        return lambda n: coef * sum(n)
    if kind == "log":
        return lambda n: coef * math.log1p(sum(n))
    # "power"
    expo = spec[2]
    return lambda n: coef * float(sum(n)) ** expo
