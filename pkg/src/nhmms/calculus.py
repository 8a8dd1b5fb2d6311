"""Functions on a space: Lebesgue norms, ball means, and the RBMO seminorm.

A ``SpaceFunction`` is a vector of real values bound to a specific space by
that space's fingerprint, so functions cannot silently be applied to the
wrong geometry.

The regularized-oscillation seminorm combines two suprema over the candidate
balls: the mass-weighted p-mean oscillation of the function against the mean
over each ball's smallest doubling dilate, normalized by the measure of the
rho-dilated ball, and the mean difference across nested doubling pairs
normalized by their chain coefficient.  Constants map to zero; the seminorm
is shift-invariant and absolutely homogeneous.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._ballsys import ball_system, resolve_beta0
from .space import ball_member_mask

DEFAULT_RHO = 6.0


@dataclass(frozen=True)
class SpaceFunction:
    """Real values on the atoms of one space, tagged by the space fingerprint."""

    space_id: str
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "values", np.asarray(self.values, dtype=np.float64))
        self.values.setflags(write=False)


def make_function(space, values):
    """Bind a value vector to a space, validating length and finiteness."""
    v = np.array(values, dtype=np.float64)
    if v.shape != (space.n,):
        raise ValueError(f"expected {space.n} values, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise ValueError("function values must be finite")
    return SpaceFunction(space_id=space.fingerprint(), values=v)


def function_values(space, f):
    """Unwrap a SpaceFunction, checking that it is bound to this space."""
    if isinstance(f, SpaceFunction):
        if f.space_id != space.fingerprint():
            raise ValueError("function is bound to a different space")
        return f.values
    return make_function(space, f).values


def lp_norm(space, f, p):
    """Mass-weighted Lebesgue norm; p = inf gives the max modulus."""
    v = function_values(space, f)
    if p == np.inf or p == float("inf"):
        return float(np.max(np.abs(v), initial=0.0))
    p = float(p)
    if p < 1.0:
        raise ValueError("p must be at least 1 (or inf)")
    return float(np.einsum("j,j->", np.abs(v) ** p, space.mass, optimize=False) ** (1.0 / p))


def ball_mean(space, f, ball):
    """Mass-weighted mean of f over the members of a ball."""
    v = function_values(space, f)
    mask = ball_member_mask(space, ball)
    w = space.mass[mask]
    return float(np.einsum("j,j->", v[mask], w, optimize=False) / np.sum(w))


def rbmo_oscillation_per_ball(space, b, rho=DEFAULT_RHO, p=1.0, beta0=None, lam=None):
    """Per-candidate-ball p-mean oscillation against the doubling-dilate mean.

    Returns one value per candidate ball (same order as the candidate list):
    ((1 / mu(rho B)) * integral_B |b - mean_{B~}(b)|^p dmu)^(1/p).
    ``lam`` is only consulted when ``beta0`` is omitted and must be derived.
    """
    if rho <= 1.0:
        raise ValueError("rho must exceed 1")
    p = float(p)
    if p < 1.0:
        raise ValueError("p must be at least 1")
    if beta0 is None:
        if lam is None:
            raise ValueError("either beta0 or lam must be provided")
        beta0 = resolve_beta0(space, lam, None)
    v = function_values(space, b)
    bs = ball_system(space)
    if bs.count == 0:
        return np.zeros(0)
    group_index, gw, gmu = bs.tilde_groups(beta0)
    tilde_means = np.einsum("gj,j->g", gw, v, optimize=False) / gmu
    dev = np.abs(v[None, :] - tilde_means[group_index][:, None]) ** p
    integrals = np.einsum("bj,bj->b", bs.weights, dev, optimize=False)
    return (integrals / bs.dilate_measures(rho)) ** (1.0 / p)


def rbmo_pair_ratios(space, lam, b, beta0):
    """Mean differences across nested doubling pairs over their chain coefficient."""
    v = function_values(space, b)
    bs = ball_system(space)
    pairs = bs.doubling_pairs(lam, beta0)
    if pairs["i_b"].size == 0:
        return np.zeros(0)
    means = np.einsum("bj,j->b", bs.weights, v, optimize=False) / np.where(bs.mu > 0, bs.mu, 1.0)
    k0 = bs.k_gamma(lam, beta0, 0.0)
    return np.abs(means[pairs["i_b"]] - means[pairs["i_q"]]) / k0


def rbmo_norm(space, lam, b, rho=DEFAULT_RHO, p=1.0, beta0=None):
    """Regularized-oscillation seminorm of b.

    The maximum of the oscillation supremum and the nested-pair supremum.
    Zero exactly for constant functions.
    """
    beta0 = resolve_beta0(space, lam, beta0)
    osc = rbmo_oscillation_per_ball(space, b, rho=rho, p=p, beta0=beta0)
    pair = rbmo_pair_ratios(space, lam, b, beta0)
    top = 0.0
    if osc.size:
        top = float(np.max(osc))
    if pair.size:
        top = max(top, float(np.max(pair)))
    return top
