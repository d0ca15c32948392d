"""Truncated-space solver for quasi-stationary behaviour.

The absorbed chain is restricted to the finite simplex of interior states
``{n in N^r : |n| <= N}``; every jump leaving that simplex -- a death onto the
boundary, a catastrophe, or a birth past the truncation -- is treated as a
kill.  The resulting sub-generator ``Q`` has strictly negative row sums
exactly on the flagged edge states, and three quantities describe the
conditioned dynamics:

* ``law``: the quasi-stationary distribution (left Perron vector of ``Q``),
* ``decay_rate``: the asymptotic extinction rate, recovered from the
  mass-loss identity ``decay_rate = -(law Q) . 1`` rather than a Rayleigh
  quotient,
* ``survival_profile``: the right Perron vector, scaled so that its mean
  under ``law`` is one; entry ``x`` is the limit of the survival probability
  from ``x`` rescaled by ``exp(decay_rate * t)``.

Everything is computed with the uniformized kernel ``P = I + Q/Lambda``:
power iteration for the eigenpairs, Poisson-weighted sums of powers for
``exp(tQ)``.  ``P`` has nonnegative entries by construction, which keeps all
transient quantities nonnegative and makes survival probabilities exactly
nonincreasing in floating point.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import spsolve
from scipy.special import gammaln

from .errors import (ConditioningImpossibleError, ConvergenceError, DomainError,
                     EmptySpaceError, NumericalError, ReducibleSpaceError,
                     ValidationError)
from .model import Model

#: Poisson tail mass discarded when summing the uniformized series.
POISSON_TAIL = 1e-14

#: Conditioning on survival is refused below this survival mass.
SURVIVAL_FLOOR = 1e-300


@dataclass(frozen=True, eq=False)
class TruncatedSpace:
    """Lexicographically enumerated interior simplex ``{n : |n| <= N}``."""

    r: int
    N: int
    states: tuple
    index: dict = field(repr=False)
    boundary: np.ndarray = field(repr=False)
    # boundary flags the states with a jump out of the truncation: births are
    # always possible, so |n| = N qualifies, as does any coordinate at 1.

    def __len__(self):
        return len(self.states)

    def vector_of(self, mapping) -> np.ndarray:
        """Dense vector aligned with the enumeration from a state->value map."""
        out = np.zeros(len(self.states))
        for state, value in mapping.items():
            out[self.index[state]] = value
        return out

    def point_mass(self, n) -> np.ndarray:
        if n not in self.index:
            raise DomainError(f"state {n} is not in the truncated space (N = {self.N})")
        out = np.zeros(len(self.states))
        out[self.index[n]] = 1.0
        return out


def enumerate_space(r: int, N: int) -> TruncatedSpace:
    """Enumerate interior states with total size at most ``N``, lexicographically."""
    if r < 1:
        raise DomainError(f"r must be >= 1, got {r}")
    if N < r:
        raise EmptySpaceError(
            f"truncation N = {N} leaves no interior state for r = {r}")
    states = tuple(_lex_states(r, N))
    index = {n: i for i, n in enumerate(states)}
    boundary = np.fromiter(
        ((sum(n) == N or min(n) == 1) for n in states), dtype=bool, count=len(states))
    return TruncatedSpace(r=r, N=N, states=states, index=index, boundary=boundary)


def _lex_states(r, N):
    if r == 1:
        for i in range(1, N + 1):
            yield (i,)
        return
    for first in range(1, N - (r - 1) + 1):
        for rest in _lex_states(r - 1, N - first):
            yield (first,) + rest


@dataclass(frozen=True, eq=False)
class SubGenerator:
    """Killed generator on a truncated space, with its uniformization constant.

    Immutable and safe to share between threads; the matrix is CSR and must
    not be modified in place.
    """

    space: TruncatedSpace
    matrix: sparse.csr_matrix
    lam: float

    @cached_property
    def matrix_t(self):
        return self.matrix.T.tocsr()


def assemble(model: Model, space: TruncatedSpace) -> SubGenerator:
    """Build the killed sub-generator of ``model`` on ``space``.

    Off-diagonal entries are jump rates between interior states of the space;
    every rate leaving the space appears only through the diagonal, which is
    minus the total outflow.  Assembly order is the enumeration order, so
    identical inputs give bit-identical matrices.
    """
    if model.r != space.r:
        raise DomainError(f"model has r = {model.r} but space has r = {space.r}")
    n_states = len(space.states)
    rows, cols, vals = [], [], []
    diag = np.zeros(n_states)
    for i, state in enumerate(space.states):
        targets, rates, total = model.transition_table(state)
        diag[i] = -total
        for target, rate in zip(targets, rates):
            j = space.index.get(target)
            if j is not None:
                rows.append(i)
                cols.append(j)
                vals.append(rate)
    rows.extend(range(n_states))
    cols.extend(range(n_states))
    vals.extend(diag)
    matrix = sparse.coo_matrix((vals, (rows, cols)),
                               shape=(n_states, n_states)).tocsr()
    matrix.sum_duplicates()
    lam = 1.05 * float(np.abs(diag).max())
    if not (lam > 0 and math.isfinite(lam)):
        raise NumericalError(f"degenerate uniformization constant {lam}")
    return SubGenerator(space=space, matrix=matrix, lam=lam)


@dataclass(frozen=True, eq=False)
class QsdResult:
    """Converged spectral data of a killed sub-generator."""

    law: np.ndarray
    decay_rate: float
    survival_profile: np.ndarray
    law_residual: float      # L1 norm of law Q + decay_rate * law
    profile_residual: float  # sup norm of Q profile + decay_rate * profile
    iterations: int
    tol: float
    space: TruncatedSpace


def solve_qsd(Q: SubGenerator, tol: float = 1e-12, max_iter: int = 10 ** 6) -> QsdResult:
    """Power iteration for the quasi-stationary law, decay rate and profile.

    Iterates the uniformized kernel ``P = I + Q/Lambda`` from the uniform
    vector, renormalizing in L1, and stops once successive iterates differ by
    less than ``tol`` in total variation *and* the eigen-residual is below
    ``10 * tol``; the adjoint iteration for the survival profile then runs
    against the converged decay rate.  Raises :class:`ConvergenceError` with
    the last residual if ``max_iter`` is hit, and
    :class:`ReducibleSpaceError` if the converged vectors are not strictly
    positive.
    """
    if not tol > 0:
        raise ValidationError(f"tol must be > 0, got {tol}")
    if max_iter < 1:
        raise ValidationError(f"max_iter must be >= 1, got {max_iter}")
    mat = Q.matrix
    lam = Q.lam
    n = mat.shape[0]

    law = np.full(n, 1.0 / n)
    decay = 0.0
    resid1 = math.inf
    used = 0
    for it in range(1, max_iter + 1):
        used = it
        y = law @ mat
        decay = -float(y.sum())
        resid1 = float(np.abs(y + decay * law).sum())
        nxt = law + y / lam
        # Renormalize by the actual sum rather than the predicted mass-loss
        # factor 1 - decay/lam: the latter leaves unit mass as an unstable
        # fixed point, and rounding drift compounds over long iterations.
        nxt /= nxt.sum()
        tv = 0.5 * float(np.abs(nxt - law).sum())
        law = nxt
        if tv < tol and resid1 < 10.0 * tol:
            break
    else:
        raise ConvergenceError(
            f"forward iteration did not converge in {max_iter} steps "
            f"(last residual {resid1:.3e})", iterations=max_iter, residual=resid1)

    profile = np.ones(n)
    # Per-row relative residual scale: rounding noise in (Q h)_i grows with
    # |q_ii| h_i, so an absolute sup-norm test is unattainable on spaces with
    # very fast states.  Dividing by |q_ii| h_i + decay + 1 makes the floor
    # a few machine epsilons regardless of rate magnitudes.
    diag_abs = np.abs(mat.diagonal())
    resid_rel = math.inf
    for it in range(1, max_iter + 1):
        used += 1
        z = mat @ profile
        resid_rel = float(
            (np.abs(z + decay * profile)
             / (diag_abs * profile + decay + 1.0)).max())
        nxt = profile + z / lam
        nxt /= nxt.max()
        diff = float(np.abs(nxt - profile).max())
        profile = nxt
        if diff < tol and resid_rel < 10.0 * tol:
            break
    else:
        raise ConvergenceError(
            f"adjoint iteration did not converge in {max_iter} steps "
            f"(last relative residual {resid_rel:.3e})",
            iterations=max_iter, residual=resid_rel)

    if (law <= 0).any() or (profile <= 0).any():
        raise ReducibleSpaceError(
            "converged eigenvectors are not strictly positive; the truncated "
            "chain looks reducible")

    profile = profile / float(law @ profile)
    y = law @ mat
    decay = -float(y.sum())
    law_residual = float(np.abs(y + decay * law).sum())
    profile_residual = float(np.abs(mat @ profile + decay * profile).max())
    return QsdResult(law=law, decay_rate=decay, survival_profile=profile,
                     law_residual=law_residual, profile_residual=profile_residual,
                     iterations=used, tol=tol, space=Q.space)


def _poisson_weights(mean: float, tail: float):
    """Exact Poisson weights on a window carrying all but ``tail`` mass."""
    sd = math.sqrt(mean)
    k_hi = int(math.ceil(mean + 10.0 * sd + 30.0))
    ks = np.arange(0, k_hi + 1, dtype=float)
    weights = np.exp(-mean + ks * math.log(mean) - gammaln(ks + 1.0))
    cum = np.cumsum(weights)
    total = cum[-1]
    first = int(np.searchsorted(cum, 0.5 * tail, side="right"))
    last = int(np.argmax((total - cum) <= 0.5 * tail))
    return first, last, weights


def _check_vector(Q, vec, name):
    vec = np.asarray(vec, dtype=float)
    if vec.shape != (Q.matrix.shape[0],):
        raise DomainError(
            f"{name} has shape {vec.shape}, space has {Q.matrix.shape[0]} states")
    return vec


def evolve_measure(Q: SubGenerator, nu: np.ndarray, t: float) -> np.ndarray:
    """Unnormalized forward flow ``nu exp(tQ)`` by uniformization."""
    nu = _check_vector(Q, nu, "nu")
    if t < 0:
        raise DomainError(f"t must be >= 0, got {t}")
    if t == 0:
        return nu.copy()
    first, last, weights = _poisson_weights(Q.lam * t, POISSON_TAIL)
    acc = np.zeros_like(nu)
    p = nu.copy()
    for k in range(last + 1):
        if k >= first:
            acc += weights[k] * p
        if k < last:
            p = p + (p @ Q.matrix) / Q.lam
    return acc


def evolve_function(Q: SubGenerator, f: np.ndarray, t: float) -> np.ndarray:
    """Backward flow ``exp(tQ) f``: survival-weighted expectations per start state."""
    f = _check_vector(Q, f, "f")
    if t < 0:
        raise DomainError(f"t must be >= 0, got {t}")
    if t == 0:
        return f.copy()
    first, last, weights = _poisson_weights(Q.lam * t, POISSON_TAIL)
    acc = np.zeros_like(f)
    p = f.copy()
    for k in range(last + 1):
        if k >= first:
            acc += weights[k] * p
        if k < last:
            p = p + (Q.matrix @ p) / Q.lam
    return acc


def transient_conditional(Q: SubGenerator, mu0: np.ndarray, t: float):
    """Law of the chain at time ``t`` conditioned on survival, plus the
    survival probability itself.

    ``mu0`` must be a probability vector on the space.  Raises
    :class:`ConditioningImpossibleError` once the survival mass underflows.
    """
    mu0 = _check_vector(Q, mu0, "mu0")
    if (mu0 < 0).any():
        raise DomainError("mu0 has negative entries")
    total = float(mu0.sum())
    if abs(total - 1.0) > 1e-9:
        raise DomainError(f"mu0 sums to {total!r}, expected 1 within 1e-9")
    nu = evolve_measure(Q, mu0, t)
    survival = float(nu.sum())
    if survival < SURVIVAL_FLOOR:
        raise ConditioningImpossibleError(
            f"survival mass {survival!r} at t = {t} underflowed; "
            "conditioning is meaningless")
    return nu / survival, survival


def survival_probability(Q: SubGenerator, mu0: np.ndarray, t: float) -> float:
    """P(not yet absorbed at time t) from initial law ``mu0``."""
    return transient_conditional(Q, mu0, t)[1]


def conditional_path(Q: SubGenerator, mu0: np.ndarray, times):
    """Conditional laws and survival probabilities along an increasing grid.

    Steps the unnormalized measure from grid point to grid point (the flow
    property makes this exact up to the Poisson tail), so a fine grid costs
    little more than its largest time.  Returns ``(laws, survivals)`` with one
    row of ``laws`` per grid time.
    """
    mu0 = _check_vector(Q, mu0, "mu0")
    times = np.asarray(times, dtype=float)
    if times.ndim != 1 or len(times) == 0:
        raise DomainError("times must be a non-empty 1-d grid")
    if times[0] < 0 or (np.diff(times) <= 0).any():
        raise DomainError("times must be nonnegative and strictly increasing")
    laws = np.empty((len(times), len(mu0)))
    survivals = np.empty(len(times))
    nu = mu0.copy()
    prev = 0.0
    for i, t in enumerate(times):
        nu = evolve_measure(Q, nu, t - prev)
        prev = t
        mass = float(nu.sum())
        if mass < SURVIVAL_FLOOR:
            raise ConditioningImpossibleError(
                f"survival mass underflowed at grid time {t}")
        survivals[i] = mass
        laws[i] = nu / mass
    return laws, survivals


def expected_hitting_time(model: Model, space: TruncatedSpace, goal) -> np.ndarray:
    """Expected time to reach the set ``goal`` or be absorbed, per start state.

    Solves the linear system ``(Q u)(n) = -1`` off ``goal`` with ``u = 0`` on
    it; killing at the truncation edge makes the answer an approximation from
    below for targets of the untruncated chain.
    """
    goal = list(goal)
    if goal and not isinstance(goal[0], tuple):
        goal = [tuple(int(v) for v in goal)]  # a single state was passed
    goal = set(goal)
    for g in goal:
        if g not in space.index:
            raise DomainError(f"goal state {g} is not in the truncated space")
    Q = assemble(model, space)
    n = len(space.states)
    keep = np.ones(n, dtype=bool)
    for g in goal:
        keep[space.index[g]] = False
    u = np.zeros(n)
    if keep.any():
        B = Q.matrix[keep][:, keep].tocsc()
        rhs = -np.ones(int(keep.sum()))
        sol = spsolve(B, rhs)
        if not np.isfinite(sol).all():
            raise NumericalError("hitting-time system is singular; the space is "
                                 "likely reducible")
        u[keep] = sol
    return u


def qprocess_generator(Q: SubGenerator, qsd: QsdResult) -> sparse.csr_matrix:
    """Generator of the chain conditioned to never die, on the same space.

    Off-diagonal rates are the original rates reweighted by the ratio of
    survival profiles, ``q(x, y) h(y) / h(x)``; the diagonal picks up the
    decay rate, so rows sum to zero up to the profile's eigen-residual.
    """
    h = qsd.survival_profile
    mat = Q.matrix.tocoo()
    vals = mat.data * h[mat.col] / h[mat.row]
    out = sparse.coo_matrix((vals, (mat.row, mat.col)), shape=mat.shape).tocsr()
    out = out + qsd.decay_rate * sparse.identity(mat.shape[0], format="csr")
    return out.tocsr()


def truncation_tv(model: Model, N: int, factor: int = 2,
                  tol: float = 1e-12, max_iter: int = 10 ** 6) -> float:
    """Total-variation gap between the laws solved at N and at factor*N.

    The small-space law is embedded into the larger space with zero padding;
    the gap is the standard diagnostic for whether the truncation is generous
    enough.
    """
    small = enumerate_space(model.r, N)
    big = enumerate_space(model.r, factor * N)
    qsd_small = solve_qsd(assemble(model, small), tol=tol, max_iter=max_iter)
    qsd_big = solve_qsd(assemble(model, big), tol=tol, max_iter=max_iter)
    padded = np.zeros(len(big.states))
    for state, mass in zip(small.states, qsd_small.law):
        padded[big.index[state]] = mass
    return 0.5 * float(np.abs(padded - qsd_big.law).sum())
