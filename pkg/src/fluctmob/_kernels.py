"""JIT-compiled inner loops for the lattice exchange dynamics."""

from __future__ import annotations

import numpy as np
from numba import njit


@njit(cache=True)
def apply_exchange_events(occ: np.ndarray, events: np.ndarray, nbr: np.ndarray) -> None:
    """Apply a sequence of attempted nearest-neighbor exchanges in order.

    Each event encodes (direction, site) as e = direction * n_sites + site.
    An attempt swaps occupation across the directed edge only when the source
    is occupied and the target empty; all other attempts are no-ops, which is
    what makes the uniformized chain exact.
    """
    n_sites = occ.shape[0]
    for e in events:
        site = e % n_sites
        direction = e // n_sites
        target = nbr[direction, site]
        if occ[site] == 1 and occ[target] == 0:
            occ[site] = 0
            occ[target] = 1
