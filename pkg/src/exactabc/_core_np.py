"""Pure-numpy implementation of the hot kernels.

Used when the compiled extension (exactabc._core) is unavailable or when
EXACTABC_BACKEND=python.  Same signatures, same results: the Gibbs sweep
consumes a caller-supplied uniform array in raster order, so compiled and
numpy backends make identical spin decisions bit for bit.
"""

import numpy as np

_ONE = np.int8(1)
_MINUS_ONE = np.int8(-1)


def gibbs_sweeps(spins, ptable, u):
    """Apply systematic raster-scan Gibbs sweeps to a batch of Ising chains.

    Parameters
    ----------
    spins : int8 array (L, W, B), modified in place
        Batch of B independent lattices.
    ptable : float64 array (9,)
        ptable[m + 4] = P(spin = +1 | neighbor sum m) for m in -4..4.
    u : float64 array (S, L, W, B)
        Uniform variates; u[s, i, j, b] decides site (i, j) of chain b in
        sweep s.
    """
    L, W, B = spins.shape
    if u.shape[1:] != (L, W, B):
        raise ValueError(f"uniforms shape {u.shape} does not match spins {spins.shape}")
    if ptable.shape != (9,):
        raise ValueError("ptable must have 9 entries (neighbor sums -4..4)")
    m = np.empty(B, dtype=np.intp)
    for s in range(u.shape[0]):
        us = u[s]
        for i in range(L):
            for j in range(W):
                m[:] = 4
                if i > 0:
                    m += spins[i - 1, j]
                if i + 1 < L:
                    m += spins[i + 1, j]
                if j > 0:
                    m += spins[i, j - 1]
                if j + 1 < W:
                    m += spins[i, j + 1]
                spins[i, j] = np.where(us[i, j] < ptable[m], _ONE, _MINUS_ONE)
    return None
