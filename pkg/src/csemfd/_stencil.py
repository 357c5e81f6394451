"""Compiled 1D staggered derivative sweeps over 3D arrays.

Each sweep evaluates ``d = sum_m W[o, m] f[o + m - off]`` along one
axis, optionally applies the CPML recursion to ``d``, and accumulates
``sign * coef * d`` into ``out``.  Samples outside the input are zero
except above the top of the z axis, where they may come from a ghost
array (``ghost[..., g]`` is the sample at index ``-(g + 1)``).

CPML arguments: ``pidx[o]`` is the row of ``psi`` for output index
``o`` or -1 outside the layers; ``pb, pa, pk`` hold ``b, a, 1/kappa``
per output index.

Each sweep exists twice: a cached serial build, and a parallel build in
which disjoint slabs of the outer output axis run on separate threads.
``sweeps(threads)`` picks one set.
"""

from __future__ import annotations

import numba
import numpy as np
from numba import njit, prange


def _sweep_x(f, W, off, out, coef, cfull, sign, psi, pidx, pb, pa, pk):
    nout, n1, n2 = out.shape
    nin = f.shape[0]
    taps = W.shape[1]
    c0 = coef[0, 0, 0]
    for i in prange(nout):
        row = np.empty(n2)
        p = pidx[i]
        for j in range(n1):
            row[:] = 0.0
            for m in range(taps):
                s = i + m - off
                if s < 0 or s >= nin:
                    continue
                w = W[i, m]
                for k in range(n2):
                    row[k] += w * f[s, j, k]
            if p >= 0:
                b = pb[i]
                a = pa[i]
                kk = pk[i]
                for k in range(n2):
                    ps = b * psi[p, j, k] + a * row[k]
                    psi[p, j, k] = ps
                    row[k] = row[k] * kk + ps
            if cfull:
                for k in range(n2):
                    out[i, j, k] += sign * coef[i, j, k] * row[k]
            else:
                c = sign * c0
                for k in range(n2):
                    out[i, j, k] += c * row[k]


def _sweep_y(f, W, off, out, coef, cfull, sign, psi, pidx, pb, pa, pk):
    n0, nout, n2 = out.shape
    nin = f.shape[1]
    taps = W.shape[1]
    c0 = coef[0, 0, 0]
    for i in prange(n0):
        row = np.empty(n2)
        for j in range(nout):
            p = pidx[j]
            row[:] = 0.0
            for m in range(taps):
                s = j + m - off
                if s < 0 or s >= nin:
                    continue
                w = W[j, m]
                for k in range(n2):
                    row[k] += w * f[i, s, k]
            if p >= 0:
                b = pb[j]
                a = pa[j]
                kk = pk[j]
                for k in range(n2):
                    ps = b * psi[p, i, k] + a * row[k]
                    psi[p, i, k] = ps
                    row[k] = row[k] * kk + ps
            if cfull:
                for k in range(n2):
                    out[i, j, k] += sign * coef[i, j, k] * row[k]
            else:
                c = sign * c0
                for k in range(n2):
                    out[i, j, k] += c * row[k]


def _sweep_z(f, WT, off, out, coef, cfull, sign, psi, pidx, pb, pa, pk, ghost):
    # WT is the transposed table (taps, nout) so the inner loop is contiguous
    n0, n1, nout = out.shape
    nin = f.shape[2]
    taps = WT.shape[0]
    ng = ghost.shape[2]
    c0 = coef[0, 0, 0]
    for i in prange(n0):
        row = np.empty(nout)
        for j in range(n1):
            row[:] = 0.0
            for m in range(taps):
                s0 = m - off
                ka = max(0, -s0)
                kb = min(nout, nin - s0)
                for k in range(min(ka, nout)):
                    g = -(k + s0) - 1
                    if g < ng:
                        row[k] += WT[m, k] * ghost[i, j, g]
                if kb <= ka:
                    continue
                # zero-based views keep the index provably non-negative, which
                # lets the loop vectorize
                wm = WT[m, ka:kb]
                fs = f[i, j, ka + s0:kb + s0]
                rs = row[ka:kb]
                for t in range(kb - ka):
                    rs[t] += wm[t] * fs[t]
            for k in range(nout):
                p = pidx[k]
                if p >= 0:
                    ps = pb[k] * psi[p, i, j] + pa[k] * row[k]
                    psi[p, i, j] = ps
                    row[k] = row[k] * pk[k] + ps
            if cfull:
                for k in range(nout):
                    out[i, j, k] += sign * coef[i, j, k] * row[k]
            else:
                c = sign * c0
                for k in range(nout):
                    out[i, j, k] += c * row[k]


sweep_x = njit(cache=True, nogil=True)(_sweep_x)
sweep_y = njit(cache=True, nogil=True)(_sweep_y)
sweep_z = njit(cache=True, nogil=True)(_sweep_z)

_parallel = None
_threads = None


def _use_safe_layers():
    # skip the TBB layer, which warns on older runtime versions
    numba.config.THREADING_LAYER_PRIORITY = ["omp", "workqueue", "tbb"]


def set_threads(n: int):
    """Thread count for the sweeps; 1 selects the serial build."""
    global _threads
    if n < 1:
        raise ValueError("thread count must be >= 1")
    _threads = min(int(n), numba.config.NUMBA_NUM_THREADS)
    if _threads > 1:
        _use_safe_layers()
        numba.set_num_threads(_threads)


def sweeps(threads: int | None = None):
    """``(sweep_x, sweep_y, sweep_z)`` for the given thread count."""
    global _parallel
    if threads is None:
        threads = _threads if _threads is not None else numba.config.NUMBA_NUM_THREADS
    if threads <= 1:
        return sweep_x, sweep_y, sweep_z
    if _parallel is None:
        _use_safe_layers()
        _parallel = tuple(njit(nogil=True, parallel=True)(f)
                          for f in (_sweep_x, _sweep_y, _sweep_z))
    return _parallel


@njit(cache=True, nogil=True)
def max_abs(a):
    m = 0.0
    for v in a.ravel():
        av = abs(v)
        if av > m or av != av:
            m = av
            if av != av:
                return np.inf
    return m
