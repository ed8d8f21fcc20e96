# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled hot kernels: batched raster-scan Gibbs sweeps for the Ising model.

Mirrors exactabc._core_np exactly; both consume the same caller-supplied
uniform array in the same order, so results are bitwise identical.
"""

from libc.stdlib cimport calloc, free


def gibbs_sweeps(signed char[:, :, ::1] spins, double[::1] ptable,
                 double[:, :, :, ::1] u):
    """Apply systematic raster-scan Gibbs sweeps to a batch of Ising chains.

    spins is int8 (L, W, B), modified in place; ptable[m + 4] is the
    conditional probability of +1 given neighbor sum m; u is (S, L, W, B)
    with u[s, i, j, b] deciding site (i, j) of chain b in sweep s.
    """
    cdef Py_ssize_t L = spins.shape[0], W = spins.shape[1], B = spins.shape[2]
    cdef Py_ssize_t S = u.shape[0]
    if u.shape[1] != L or u.shape[2] != W or u.shape[3] != B:
        raise ValueError(
            f"uniforms shape ({u.shape[0]}, {u.shape[1]}, {u.shape[2]}, "
            f"{u.shape[3]}) does not match spins ({L}, {W}, {B})"
        )
    if ptable.shape[0] != 9:
        raise ValueError("ptable must have 9 entries (neighbor sums -4..4)")

    # A row of zeros stands in for the missing neighbor at each boundary,
    # keeping the inner loop over chains branch-free.
    cdef signed char *zero = <signed char *> calloc(B, sizeof(signed char))
    if zero == NULL:
        raise MemoryError("could not allocate boundary row")
    cdef signed char *base = &spins[0, 0, 0]
    cdef double *ubase = &u[0, 0, 0, 0]
    cdef signed char *row
    cdef signed char *up
    cdef signed char *down
    cdef signed char *left
    cdef signed char *right
    cdef double *urow
    cdef double pt[9]
    cdef Py_ssize_t s, i, j, b, m
    for m in range(9):
        pt[m] = ptable[m]
    with nogil:
        for s in range(S):
            for i in range(L):
                for j in range(W):
                    row = base + (i * W + j) * B
                    up = row - W * B if i > 0 else zero
                    down = row + W * B if i + 1 < L else zero
                    left = row - B if j > 0 else zero
                    right = row + B if j + 1 < W else zero
                    urow = ubase + ((s * L + i) * W + j) * B
                    for b in range(B):
                        m = 4 + up[b] + down[b] + left[b] + right[b]
                        row[b] = 1 if urow[b] < pt[m] else -1
    free(zero)
    return None
