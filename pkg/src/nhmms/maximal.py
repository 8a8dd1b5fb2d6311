"""Sharp, doubling, and fractional maximal operators.

All three are per-atom suprema over candidate balls containing the atom.
The sharp operator adds an oscillation supremum and a supremum of mean
differences over nested doubling pairs; the doubling operator restricts to
doubling balls; the fractional operator normalizes the p-mean over a ball by
a power of the measure of its rho-dilate.

The doubling operator must dominate |f| pointwise.  Candidate balls resolve
nothing below the minimal separation, so in addition to the candidates the
supremum for each atom includes that atom's half-nearest-neighbour ball
(whose only member is the atom itself) when it is doubling, and that ball's
smallest doubling dilate always.  Domination is therefore a tested property,
not an assumption: for a pathological space or threshold the reported values
simply fail the inequality.
"""

from __future__ import annotations

import numpy as np

from ._ballsys import ball_system, resolve_beta0
from .calculus import function_values, make_function
from .space import Ball, ball_member_mask, is_doubling, smallest_doubling_dilate


def _atom_max(values, mask, n):
    """Per-atom max of per-ball values over the balls containing the atom."""
    if values.size == 0:
        return np.zeros(n)
    stacked = np.where(mask, values[:, None], -np.inf)
    out = np.max(stacked, axis=0)
    return np.where(np.isfinite(out), out, 0.0)


def sharp_maximal(space, lam, f, beta=0.0, beta0=None):
    """Oscillation-measuring maximal function.

    Per atom: the supremum over candidate balls B containing it of
    (1/mu(6B)) integral_B |f - mean over B's smallest doubling dilate|,
    plus the supremum over nested doubling pairs (B, Q) with the atom in B
    of |mean_B f - mean_Q f| divided by the pair's chain coefficient with
    exponent beta.  Zero for constant f.
    """
    if not 0.0 <= beta < 1.0:
        raise ValueError("beta must lie in [0, 1)")
    v = function_values(space, f)
    beta0 = resolve_beta0(space, lam, beta0)
    bs = ball_system(space)
    n = space.n
    if bs.count == 0:
        return make_function(space, np.zeros(n))

    group_index, gw, gmu = bs.tilde_groups(beta0)
    tilde_means = np.einsum("gj,j->g", gw, v, optimize=False) / gmu
    dev = np.abs(v[None, :] - tilde_means[group_index][:, None])
    osc = np.einsum("bj,bj->b", bs.weights, dev, optimize=False) / bs.dilate_measures(6.0)
    first = _atom_max(osc, bs.mask, n)

    pairs = bs.doubling_pairs(lam, beta0)
    if pairs["i_b"].size:
        means = np.einsum("bj,j->b", bs.weights, v, optimize=False) / bs.mu
        ratios = np.abs(means[pairs["i_b"]] - means[pairs["i_q"]]) / bs.k_gamma(lam, beta0, beta)
        second = _atom_max(ratios, bs.mask[pairs["i_b"]], n)
    else:
        second = np.zeros(n)
    return make_function(space, first + second)


def doubling_maximal(space, f, beta0):
    """Non-centered maximal mean of |f| over doubling balls containing each atom."""
    if beta0 < 1.0:
        raise ValueError("beta0 must be at least 1")
    v = np.abs(function_values(space, f))
    n = space.n
    if n == 1:
        return make_function(space, v.copy())
    bs = ball_system(space)
    reps = bs.representatives()
    reps = reps[bs.doubling_mask(beta0)[reps]]
    if reps.size:
        means = np.einsum("bj,j->b", bs.weights[reps], v, optimize=False) / bs.mu[reps]
        out = _atom_max(means, bs.mask[reps], n)
    else:
        out = np.zeros(n)

    off = space.dist + np.diag(np.full(n, np.inf))
    nearest = off.min(axis=1)
    for x in range(n):
        seed_ball = Ball(x, float(nearest[x]) / 2.0)
        if is_doubling(space, seed_ball, beta0):
            out[x] = max(out[x], v[x])
        dilate, _ = smallest_doubling_dilate(space, seed_ball, beta0)
        mask = ball_member_mask(space, dilate)
        w = space.mass[mask]
        out[x] = max(out[x], float(np.einsum("j,j->", v[mask], w, optimize=False) / np.sum(w)))
    return make_function(space, out)


def fractional_maximal(space, f, r=1.0, rho=5.0, alpha_over=0.0):
    """Non-centered fractional maximal operator.

    Per atom: sup over candidate balls B containing it of
    ((1 / mu(rho B)**(1 - alpha_over * r)) integral_B |f|**r)**(1/r).
    With r = 1 and alpha_over = 0 this is the plain rho-normalized maximal
    mean.
    """
    if r < 1.0:
        raise ValueError("r must be at least 1")
    if rho < 1.0:
        raise ValueError("rho must be at least 1")
    if not 0.0 <= alpha_over < 1.0:
        raise ValueError("alpha_over must lie in [0, 1)")
    if alpha_over * r >= 1.0:
        raise ValueError("alpha_over * r must stay below 1")
    v = np.abs(function_values(space, f)) ** r
    bs = ball_system(space)
    n = space.n
    if bs.count == 0:
        return make_function(space, np.zeros(n))
    integrals = np.einsum("bj,j->b", bs.weights, v, optimize=False)
    norm = bs.dilate_measures(rho) ** (1.0 - alpha_over * r)
    vals = (integrals / norm) ** (1.0 / r)
    return make_function(space, _atom_max(vals, bs.mask, n))
