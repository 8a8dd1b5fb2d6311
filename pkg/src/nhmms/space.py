"""Finite metric measure spaces, dominating functions, and doubling machinery.

A space is a finite set of atoms carrying a metric (an explicit symmetric
distance table) and a strictly positive mass per atom.  Growth of the measure
is controlled by a dominating function lambda(x, r), non-decreasing in r,
with mu(B(x, r)) <= lambda(x, r) at every resolved scale.

Two conventions hold throughout the package:

* Balls are closed: B(x, r) = {y : d(x, y) <= r}.  On a finite space every
  open ball coincides with a closed ball of the next-smaller realized radius,
  so nothing is lost, and candidate radii can be read straight off the
  distance multiset.
* All ball suprema and doubling checks range over the admissible radii, the
  positive values actually realized by the distance table (dilated by powers
  of 6 where a formula requires it).  An atomic measure resolves no structure
  below the minimal separation, so growth conditions are only meaningful at
  those scales.

The dilation factor for doubling balls is fixed at 6.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass

import numpy as np

DILATION = 6.0

# Multipliers probed when measuring the lower-scaling exponent of lambda.
_SCALING_PROBES = (2.0, 6.0, 36.0)


class MetricMeasureSpace:
    """Finite point set with a metric given by a distance table and atomic masses.

    Attributes:
        n: number of atoms.
        dist: (n, n) symmetric nonnegative distance table.
        mass: (n,) strictly positive atom masses.
        coords: optional (n, d) coordinate table, kept for provenance only.
        admissible_radii: sorted unique positive entries of ``dist``.

    Instances are immutable by convention; all operations on them are pure.
    """

    def __init__(self, dist, mass, coords=None, validate=True):
        dist = np.ascontiguousarray(dist, dtype=np.float64)
        mass = np.ascontiguousarray(mass, dtype=np.float64)
        if dist.ndim != 2 or dist.shape[0] != dist.shape[1]:
            raise ValueError("distance table must be square")
        if mass.ndim != 1 or mass.shape[0] != dist.shape[0]:
            raise ValueError("mass vector length must match the distance table")
        self.dist = dist
        self.mass = mass
        self.n = int(mass.shape[0])
        self.coords = None if coords is None else np.ascontiguousarray(coords, dtype=np.float64)
        if validate:
            self._validate()
        pos = dist[dist > 0.0]
        self.admissible_radii = np.unique(pos)
        self.dist.setflags(write=False)
        self.mass.setflags(write=False)
        if self.coords is not None:
            self.coords.setflags(write=False)
        self._cache: dict = {}

    @classmethod
    def from_points(cls, points, mass, validate=True):
        """Build a space from Euclidean coordinates; distances are derived."""
        pts = np.ascontiguousarray(points, dtype=np.float64)
        if pts.ndim == 1:
            pts = pts[:, None]
        diff = pts[:, None, :] - pts[None, :, :]
        dist = np.sqrt(np.einsum("ijk,ijk->ij", diff, diff, optimize=False))
        np.fill_diagonal(dist, 0.0)
        return cls(dist, mass, coords=pts, validate=validate)

    def _validate(self):
        d, n = self.dist, self.n
        if not np.all(np.isfinite(d)):
            raise ValueError("distance table contains non-finite entries")
        bad = np.nonzero(np.abs(np.diagonal(d)) > 0.0)[0]
        if bad.size:
            raise ValueError(f"nonzero diagonal distance at atom {bad[0]}")
        asym = np.nonzero(d != d.T)
        if asym[0].size:
            i, j = int(asym[0][0]), int(asym[1][0])
            raise ValueError(f"asymmetric distances at pair ({i}, {j})")
        off = d + np.diag(np.full(n, np.inf))
        zero = np.nonzero(off <= 0.0)
        if zero[0].size:
            i, j = int(zero[0][0]), int(zero[1][0])
            raise ValueError(f"atoms {i} and {j} are not separated (distance {d[i, j]})")
        if not np.all(self.mass > 0.0) or not np.all(np.isfinite(self.mass)):
            raise ValueError("all atom masses must be positive and finite")
        # Triangle inequality, checked one intermediate point at a time to
        # keep memory linear in n^2.  Slack absorbs roundoff in tables that
        # were derived from coordinates.
        tol = 1e-9 * (1.0 + float(d.max(initial=0.0)))
        for k in range(n):
            slack = d - (d[:, k][:, None] + d[k, :][None, :])
            worst = np.unravel_index(np.argmax(slack), slack.shape)
            if slack[worst] > tol:
                i, j = int(worst[0]), int(worst[1])
                raise ValueError(
                    f"triangle inequality violated at triple ({i}, {j}, {k}): "
                    f"d[{i}][{j}]={d[i, j]} > d[{i}][{k}]+d[{k}][{j}]={d[i, k] + d[k, j]}"
                )

    @property
    def diameter(self):
        return float(self.dist.max(initial=0.0))

    def total_mass(self):
        return float(np.sum(self.mass))

    def fingerprint(self):
        """Hex digest identifying the metric-measure data (not the coordinates)."""
        fp = self._cache.get("fingerprint")
        if fp is None:
            h = hashlib.sha256()
            h.update(np.int64(self.n).tobytes())
            h.update(self.dist.tobytes())
            h.update(self.mass.tobytes())
            fp = h.hexdigest()
            self._cache["fingerprint"] = fp
        return fp

    def __repr__(self):
        return f"MetricMeasureSpace(n={self.n}, diameter={self.diameter})"


@dataclass(frozen=True)
class Ball:
    """A closed ball, identified by its center atom and a positive radius."""

    center: int
    radius: float

    def dilate(self, factor):
        return Ball(self.center, self.radius * float(factor))


@dataclass(frozen=True)
class DominatingFunction:
    """Parametric family lambda(x, r) controlling measure growth.

    Families:
        power:            lambda(x, r) = C * r**k
        floored_power:    lambda(x, r) = max(C * r**k, mass[x])
        per_point_power:  lambda(x, r) = C_x * r**k
        power_max:        lambda(x, r) = C * max(r**k, r**k_hi)

    ``m`` is the declared lower-scaling exponent (lambda(x, a*r) should grow
    at least like a**m), ``C_lambda`` the declared doubling constant and
    ``C_tilde`` the declared center-comparability constant.  Declared values
    are promises; ``check_upper_doubling`` measures the realized ones.
    """

    family: str
    C: float = 1.0
    k: float = 1.0
    C_per_point: tuple = None
    k_hi: float = None
    m: float = None
    C_lambda: float = None
    C_tilde: float = None

    def __post_init__(self):
        if self.family not in ("power", "floored_power", "per_point_power", "power_max"):
            raise ValueError(f"unknown dominating-function family: {self.family!r}")
        if self.k < 0:
            raise ValueError("growth exponent k must be nonnegative")
        if self.family == "per_point_power":
            if not self.C_per_point:
                raise ValueError("per_point_power requires per-point scales")
            cs = np.asarray(self.C_per_point, dtype=np.float64)
            if np.any(cs <= 0):
                raise ValueError("per-point scales must be positive")
            ratio = float(cs.max() / cs.min())
            object.__setattr__(self, "C_per_point", tuple(float(c) for c in cs))
            if self.C_tilde is None:
                object.__setattr__(self, "C_tilde", ratio)
            elif ratio > self.C_tilde * (1.0 + 1e-12):
                raise ValueError(
                    f"per-point scale spread {ratio} exceeds declared C_tilde {self.C_tilde}"
                )
        else:
            if self.C <= 0:
                raise ValueError("scale C must be positive")
        if self.family == "power_max":
            if self.k_hi is None or self.k_hi < self.k:
                raise ValueError("power_max needs k_hi >= k")
        top = self.k_hi if self.family == "power_max" else self.k
        if self.C_lambda is None:
            object.__setattr__(self, "C_lambda", 2.0 ** top)
        if self.C_tilde is None:
            object.__setattr__(self, "C_tilde", 1.0)
        if self.m is None:
            object.__setattr__(self, "m", self.k)

    @classmethod
    def power(cls, C, k, m=None, C_tilde=None):
        return cls(family="power", C=C, k=k, m=m, C_tilde=C_tilde)

    @classmethod
    def floored_power(cls, C, k, m=None, C_tilde=None):
        return cls(family="floored_power", C=C, k=k, m=m, C_tilde=C_tilde)

    @classmethod
    def per_point_power(cls, scales, k, m=None, C_tilde=None):
        return cls(family="per_point_power", C_per_point=tuple(scales), k=k, m=m,
                   C_tilde=C_tilde)

    @classmethod
    def power_max(cls, C, k_lo, k_hi, m=None):
        return cls(family="power_max", C=C, k=k_lo, k_hi=k_hi,
                   m=k_lo if m is None else m, C_lambda=2.0 ** k_hi)

    def value(self, space, x, r):
        """Evaluate lambda at atom indices ``x`` and radii ``r`` (broadcasting)."""
        r = np.asarray(r, dtype=np.float64)
        if self.family == "power":
            out = self.C * r ** self.k
        elif self.family == "floored_power":
            out = np.maximum(self.C * r ** self.k, space.mass[x])
        elif self.family == "per_point_power":
            cs = np.asarray(self.C_per_point, dtype=np.float64)
            out = cs[x] * r ** self.k
        else:
            out = self.C * np.maximum(r ** self.k, r ** self.k_hi)
        if out.ndim == 0:
            return float(out)
        return out


@dataclass(frozen=True)
class DoublingReport:
    """Measured growth constants of a (space, lambda) pair, with pass flags."""

    measured_C0: float
    measured_C_lambda: float
    measured_C_tilde: float
    measured_m: float
    weak_growth_constant: float
    weak_growth_samples: int
    epsilon: float
    covering_N0: int
    dimension_n: float
    beta0: float
    pass_upper_doubling: bool
    pass_lambda_doubling: bool
    pass_comparability: bool
    pass_lower_scaling: bool

    @property
    def all_pass(self):
        return (self.pass_upper_doubling and self.pass_lambda_doubling
                and self.pass_comparability and self.pass_lower_scaling)

    def to_dict(self):
        return {
            "measured_C0": self.measured_C0,
            "measured_C_lambda": self.measured_C_lambda,
            "measured_C_tilde": self.measured_C_tilde,
            "measured_m": self.measured_m,
            "weak_growth_constant": self.weak_growth_constant,
            "weak_growth_samples": self.weak_growth_samples,
            "epsilon": self.epsilon,
            "covering_N0": self.covering_N0,
            "dimension_n": self.dimension_n,
            "beta0": self.beta0,
            "pass": {
                "upper_doubling": self.pass_upper_doubling,
                "lambda_doubling": self.pass_lambda_doubling,
                "comparability": self.pass_comparability,
                "lower_scaling": self.pass_lower_scaling,
            },
            "all_pass": self.all_pass,
        }


def _check_center(space, ball):
    c = ball.center
    if not (isinstance(c, (int, np.integer)) and 0 <= c < space.n):
        raise IndexError(f"ball center {c!r} out of range for {space.n} atoms")
    if not ball.radius > 0:
        raise ValueError(f"ball radius must be positive, got {ball.radius}")


def ball_member_mask(space, ball):
    """Boolean membership mask of a closed ball."""
    _check_center(space, ball)
    return space.dist[ball.center] <= ball.radius


def ball_members(space, ball):
    """Sorted atom indices of the closed ball; always contains the center."""
    return np.nonzero(ball_member_mask(space, ball))[0]


def measure(space, atoms):
    """Total mass of a set of atoms (indices or a boolean mask); empty -> 0."""
    atoms = np.asarray(atoms)
    if atoms.dtype == bool:
        return float(np.sum(space.mass[atoms]))
    if atoms.size == 0:
        return 0.0
    if np.any(atoms < 0) or np.any(atoms >= space.n):
        raise IndexError("atom index out of range")
    return float(np.sum(space.mass[atoms]))


def ball_measure(space, ball):
    return float(np.sum(space.mass[ball_member_mask(space, ball)]))


def candidate_balls(space):
    """All balls (center, r) with r admissible, center-major, radii ascending.

    Every member set realizable by a ball of radius at least the minimal
    admissible value appears among the candidates with the same center;
    member sets below the minimal separation (bare singletons) are not
    resolved at admissible scales.
    """
    radii = space.admissible_radii
    return [Ball(c, float(r)) for c in range(space.n) for r in radii]


def is_doubling(space, ball, beta0):
    """Whether mu(6B) <= beta0 * mu(B)."""
    if beta0 < 1.0:
        raise ValueError("beta0 must be at least 1")
    return ball_measure(space, ball.dilate(DILATION)) <= beta0 * ball_measure(space, ball)


def smallest_doubling_dilate(space, ball, beta0):
    """The smallest 6**k dilate of ``ball`` that is doubling, with its k.

    Terminates on any finite space: once the dilate covers everything, its
    own 6-fold dilate has the same measure.
    """
    if beta0 < 1.0:
        raise ValueError("beta0 must be at least 1")
    current = ball
    for k in range(256):
        if is_doubling(space, current, beta0):
            return current, k
        current = current.dilate(DILATION)
    raise RuntimeError("no doubling dilate found; beta0 or the space is degenerate")


def k_coefficient(space, lam, inner, outer, gamma=0.0):
    """Chain coefficient of a nested ball pair: 1 plus the sum over dilation
    steps of the density ratio mu(6**k B) / lambda(x_B, 6**k r_B), each
    raised to the power (1 - gamma).

    Requires member containment and r_B <= r_Q.  Equals 1 when no dilation
    step is needed (e.g. equal radii).
    """
    if not 0.0 <= gamma < 1.0:
        raise ValueError("gamma must lie in [0, 1)")
    inner_mask = ball_member_mask(space, inner)
    outer_mask = ball_member_mask(space, outer)
    if np.any(inner_mask & ~outer_mask) or inner.radius > outer.radius:
        raise ValueError("k_coefficient requires the first ball to be contained in the second")
    steps = 0
    r = inner.radius
    while r < outer.radius * (1.0 - 1e-12):
        r *= DILATION
        steps += 1
        if steps > 256:
            raise RuntimeError("dilation chain failed to reach the outer radius")
    total = 1.0
    exponent = 1.0 - gamma
    for k in range(1, steps + 1):
        rk = inner.radius * DILATION ** k
        mu = ball_measure(space, Ball(inner.center, rk))
        lv = lam.value(space, inner.center, rk)
        total += (mu / lv) ** exponent
    return total


def covering_number(space, ball):
    """Greedy farthest-point count of half-radius balls covering the ball.

    Centers are chosen among the ball's members, starting from its own
    center and then repeatedly taking the uncovered member farthest from the
    chosen centers (ties resolved by smallest index).  A heuristic upper
    estimate of the geometric covering count, reported as measured.
    """
    members = ball_members(space, ball)
    half = ball.radius / 2.0
    d = space.dist
    chosen = [ball.center]
    covered = d[ball.center, members] <= half
    while not covered.all():
        sub = members[~covered]
        dmin = d[np.ix_(chosen, sub)].min(axis=0)
        pick = int(sub[np.argmax(dmin)])
        chosen.append(pick)
        covered |= d[pick, members] <= half
    return len(chosen)


def geometric_covering_bound(space):
    """Max greedy covering number over one ball per realized member set."""
    cached = space._cache.get("covering_N0")
    if cached is not None:
        return cached
    best = 1
    for c in range(space.n):
        for r in np.unique(space.dist[c][space.dist[c] > 0]):
            best = max(best, covering_number(space, Ball(c, float(r))))
    space._cache["covering_N0"] = best
    return best


def default_beta0(space, lam):
    """Threshold 2 * max(C_lambda**(3*log2 6), 6**n), n = log2 of the covering count."""
    n_dim = math.log2(geometric_covering_bound(space))
    return 2.0 * max(lam.C_lambda ** (3.0 * math.log2(6.0)), 6.0 ** n_dim)


def check_upper_doubling(space, lam, epsilon=0.5, beta0=None, samples=10000, seed=0):
    """Measure the growth constants of (space, lambda) and report pass flags.

    The measure-domination scan is exhaustive over centers x admissible
    radii; the doubling, comparability, and lower-scaling constants are
    measured on the admissible radius grid; the weak-growth constant (the
    minimal C with |lambda(y, r+t) - lambda(x, r)| <= C*((d(x,y)+t)/r)**eps
    * lambda(x, r) over d(x,y) <= r, 0 <= t <= r) is estimated from a seeded
    sample because its domain is continuous.  Never raises on a failed
    condition; the report carries the verdicts.
    """
    if not 0.0 < epsilon < 1.0:
        raise ValueError("epsilon must lie in (0, 1)")
    radii = space.admissible_radii
    idx = np.arange(space.n)

    c0 = 0.0
    for r in radii:
        mask = space.dist <= r
        mu = np.einsum("ij,j->i", mask.astype(np.float64), space.mass, optimize=False)
        lv = np.asarray(lam.value(space, idx, np.full(space.n, r)))
        c0 = max(c0, float(np.max(mu / lv)))

    c_lam = 0.0
    c_tilde = 0.0
    m_meas = math.inf
    if radii.size:
        for r in radii:
            lv = np.asarray(lam.value(space, idx, np.full(space.n, r)))
            half = np.asarray(lam.value(space, idx, np.full(space.n, r / 2.0)))
            c_lam = max(c_lam, float(np.max(lv / half)))
            near = space.dist <= r
            ratio = lv[:, None] / lv[None, :]
            c_tilde = max(c_tilde, float(np.max(np.where(near, ratio, 0.0))))
            for a in _SCALING_PROBES:
                up = np.asarray(lam.value(space, idx, np.full(space.n, a * r)))
                m_meas = min(m_meas, float(np.min(np.log(up / lv) / math.log(a))))
    else:
        c_lam = lam.C_lambda
        c_tilde = 1.0
        m_meas = lam.m

    rng = np.random.default_rng(seed)
    weak_c = 0.0
    accepted = 0
    if radii.size:
        r_max = float(radii[-1])
        for _ in range(samples):
            x = int(rng.integers(space.n))
            y = int(rng.integers(space.n))
            dxy = float(space.dist[x, y])
            r = dxy + float(rng.random()) * max(r_max - dxy, r_max * 0.5)
            if r <= 0.0:
                continue
            t = float(rng.random()) * r
            if dxy + t <= 0.0:
                continue
            base = float(lam.value(space, x, r))
            upper = float(lam.value(space, y, r + t))
            ratio = abs(upper - base) / (((dxy + t) / r) ** epsilon * base)
            weak_c = max(weak_c, ratio)
            accepted += 1

    n0 = geometric_covering_bound(space)
    dim_n = math.log2(n0)
    b0 = default_beta0(space, lam) if beta0 is None else float(beta0)

    return DoublingReport(
        measured_C0=c0,
        measured_C_lambda=c_lam,
        measured_C_tilde=c_tilde,
        measured_m=m_meas,
        weak_growth_constant=weak_c,
        weak_growth_samples=accepted,
        epsilon=epsilon,
        covering_N0=n0,
        dimension_n=dim_n,
        beta0=b0,
        pass_upper_doubling=c0 <= 1.0,
        pass_lambda_doubling=c_lam <= lam.C_lambda * (1.0 + 1e-12),
        pass_comparability=c_tilde <= lam.C_tilde * (1.0 + 1e-12),
        pass_lower_scaling=m_meas >= lam.m - 1e-12,
    )
