"""Shared precomputed candidate-ball machinery.

Ball suprema (oscillation norms, maximal operators, mean-difference pairs)
repeatedly need the same per-ball data: member weights, measures, dilate
measures, doubling verdicts, smallest doubling dilates, and the chain
coefficients of nested doubling pairs.  This module computes them once per
space and caches them on the space instance.

Candidate balls are ordered center-major with radii ascending, matching
``space.candidate_balls``.  The doubling-pair enumeration is pruned per the
documented rule: for each center, one representative ball per realized
member set (the smallest admissible radius realizing it), doubling judged at
that radius; pairs then range over representatives with member containment
and nondecreasing radius, same-ball pairs included (they contribute zero to
any mean-difference supremum).

All reductions here go through einsum/bincount with a fixed accumulation
order, so results are bit-stable regardless of the caller's thread count.
"""

from __future__ import annotations

import numpy as np

from .space import DILATION, default_beta0


class BallSystem:
    """Per-space cache of candidate-ball arrays and doubling-pair data."""

    def __init__(self, space):
        self.space = space
        n = space.n
        radii = space.admissible_radii
        n_r = radii.size
        self.centers = np.repeat(np.arange(n), n_r)
        self.radii = np.tile(radii, n)
        self.count = self.centers.size
        if self.count:
            self.mask = space.dist[self.centers] <= self.radii[:, None]
        else:
            self.mask = np.zeros((0, n), dtype=bool)
        self.weights = self.mask * space.mass[None, :]
        self.mu = np.einsum("bj->b", self.weights, optimize=False)
        self._dilate_mu = {}
        self._doubling = {}
        self._tilde = {}
        self._reps = None
        self._pairs = {}
        self._kgamma = {}

    # -- measures at arbitrary radii -------------------------------------------

    def measures_at(self, centers, radii):
        """mu(B(c, r)) for parallel arrays of centers and radii."""
        mask = self.space.dist[centers] <= np.asarray(radii)[:, None]
        return np.einsum("bj,j->b", mask.astype(np.float64), self.space.mass,
                         optimize=False)

    def dilate_measures(self, rho):
        """mu(rho * B) for every candidate ball, cached per rho."""
        key = float(rho)
        out = self._dilate_mu.get(key)
        if out is None:
            out = self.measures_at(self.centers, self.radii * key)
            self._dilate_mu[key] = out
        return out

    # -- doubling machinery ------------------------------------------------------

    def doubling_mask(self, beta0):
        key = float(beta0)
        out = self._doubling.get(key)
        if out is None:
            out = self.dilate_measures(DILATION) <= key * self.mu
            self._doubling[key] = out
        return out

    def tilde_groups(self, beta0):
        """Smallest doubling dilate of every candidate ball, as mean groups.

        Returns (group_index, group_weights, group_mu): a per-ball index into
        the deduplicated member sets of the dilates, the mass weights of each
        set, and its measure.
        """
        key = float(beta0)
        out = self._tilde.get(key)
        if out is not None:
            return out
        if beta0 < 1.0:
            raise ValueError("beta0 must be at least 1")
        n = self.space.n
        cur = self.radii.copy()
        for _ in range(256):
            mu_cur = self.measures_at(self.centers, cur)
            mu_six = self.measures_at(self.centers, cur * DILATION)
            growing = mu_six > key * mu_cur
            if not growing.any():
                break
            cur[growing] *= DILATION
        else:
            raise RuntimeError("doubling dilates did not stabilize")
        tilde_mask = self.space.dist[self.centers] <= cur[:, None]
        if self.count:
            uniq, inverse = np.unique(tilde_mask, axis=0, return_inverse=True)
        else:
            uniq = np.zeros((0, n), dtype=bool)
            inverse = np.zeros(0, dtype=np.intp)
        gw = uniq * self.space.mass[None, :]
        gmu = np.einsum("gj->g", gw, optimize=False)
        out = (np.asarray(inverse, dtype=np.intp).ravel(), gw, gmu)
        self._tilde[key] = out
        return out

    # -- deduplicated representatives ---------------------------------------------

    def representatives(self):
        """One candidate ball per (center, member set): the smallest radius.

        Per center the member sets are nested as the radius grows, so the set
        changes exactly where the member count does.
        """
        if self._reps is not None:
            return self._reps
        n_r = self.space.admissible_radii.size
        counts = np.einsum("bj->b", self.mask.astype(np.int64), optimize=False)
        keep = []
        for c in range(self.space.n):
            lo = c * n_r
            prev = -1
            for i in range(lo, lo + n_r):
                if counts[i] != prev:
                    keep.append(i)
                    prev = counts[i]
        self._reps = np.asarray(keep, dtype=np.intp)
        return self._reps

    # -- doubling pairs with containment --------------------------------------------

    def doubling_pairs(self, lam, beta0):
        """Doubling pairs (B, Q) with B contained in Q, over representatives.

        Returns a dict of parallel arrays: ``i_b``/``i_q`` index the candidate
        list; ``steps`` is the length of each pair's dilation chain; the
        per-step density ratios mu(6**s B) / lambda(x_B, 6**s r_B) are laid
        out pair-major in ``t_flat`` with ``t_offsets`` marking segments.
        """
        key = (lam, float(beta0))
        out = self._pairs.get(key)
        if out is not None:
            return out
        reps = self.representatives()
        reps = reps[self.doubling_mask(beta0)[reps]]
        if reps.size == 0:
            out = {
                "i_b": np.zeros(0, dtype=np.intp),
                "i_q": np.zeros(0, dtype=np.intp),
                "steps": np.zeros(0, dtype=np.intp),
                "t_flat": np.zeros(0),
                "t_offsets": np.zeros(1, dtype=np.intp),
            }
            self._pairs[key] = out
            return out
        sub = self.mask[reps].astype(np.int64)
        inter = np.einsum("ik,jk->ij", sub, sub, optimize=False)
        sizes = np.diagonal(inter)
        contained = inter == sizes[:, None]
        r_ok = self.radii[reps][:, None] <= self.radii[reps][None, :]
        pair_i, pair_j = np.nonzero(contained & r_ok)
        i_b = reps[pair_i]
        i_q = reps[pair_j]

        # Chain length: smallest s >= 0 with 6**s * r_B >= r_Q, with the same
        # relative slack used by the scalar chain coefficient.
        rb = self.radii[i_b]
        rq = self.radii[i_q]
        steps = np.zeros(i_b.size, dtype=np.intp)
        grow = rb.copy()
        active = grow < rq * (1.0 - 1e-12)
        while active.any():
            grow[active] *= DILATION
            steps[active] += 1
            active = grow < rq * (1.0 - 1e-12)

        t_offsets = np.zeros(i_b.size + 1, dtype=np.intp)
        np.cumsum(steps, out=t_offsets[1:])
        t_flat = np.zeros(int(t_offsets[-1]))
        for s in range(1, int(steps.max(initial=0)) + 1):
            sel = np.nonzero(steps >= s)[0]
            if sel.size == 0:
                continue
            rk = self.radii[i_b[sel]] * DILATION ** s
            mu = self.measures_at(self.centers[i_b[sel]], rk)
            lv = np.asarray(lam.value(self.space, self.centers[i_b[sel]], rk))
            t_flat[t_offsets[sel] + (s - 1)] = mu / lv
        out = {
            "i_b": i_b,
            "i_q": i_q,
            "steps": steps,
            "t_flat": t_flat,
            "t_offsets": t_offsets,
        }
        self._pairs[key] = out
        return out

    def k_gamma(self, lam, beta0, gamma):
        """Chain coefficient of every enumerated doubling pair, cached per gamma."""
        key = (lam, float(beta0), float(gamma))
        out = self._kgamma.get(key)
        if out is not None:
            return out
        pairs = self.doubling_pairs(lam, beta0)
        n_pairs = pairs["i_b"].size
        sums = np.zeros(n_pairs)
        if pairs["t_flat"].size:
            owner = np.repeat(np.arange(n_pairs), pairs["steps"])
            sums = np.bincount(owner, weights=pairs["t_flat"] ** (1.0 - gamma),
                               minlength=n_pairs)
        out = 1.0 + sums
        self._kgamma[key] = out
        return out


def ball_system(space):
    bs = space._cache.get("ballsys")
    if bs is None:
        bs = BallSystem(space)
        space._cache["ballsys"] = bs
    return bs


def resolve_beta0(space, lam, beta0):
    return default_beta0(space, lam) if beta0 is None else float(beta0)
