"""Thread-count resolution and deterministic per-atom parallel mapping.

Outputs of every operator are independent per atom, so atom ranges can be
partitioned across worker threads freely; results are gathered in index
order, which makes them identical for any worker count.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor

ENV_THREADS = "NHMMS_THREADS"


def resolve_threads(requested=None):
    """Worker count: NHMMS_THREADS overrides the request; default hardware count."""
    env = os.environ.get(ENV_THREADS)
    if env:
        try:
            requested = int(env)
        except ValueError:
            raise ValueError(f"{ENV_THREADS} must be an integer, got {env!r}")
    if requested is None:
        requested = os.cpu_count() or 1
    return max(1, int(requested))


def map_atoms(fn, n_atoms, threads=None):
    """Apply ``fn(atom_index) -> float`` over all atoms, in index order.

    With more than one worker the atom range is split into contiguous chunks
    evaluated concurrently; the gathered result is independent of the split.
    """
    workers = resolve_threads(threads)
    if workers == 1 or n_atoms < 4 * workers:
        return [fn(x) for x in range(n_atoms)]
    bounds = [(n_atoms * w) // workers for w in range(workers + 1)]
    chunks = [range(bounds[w], bounds[w + 1]) for w in range(workers)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        parts = pool.map(lambda ch: [fn(x) for x in ch], chunks)
        out = []
        for part in parts:
            out.extend(part)
    return out
