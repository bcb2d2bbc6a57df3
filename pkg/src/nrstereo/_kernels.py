"""Compiled inner loop of the greedy sparse-model builder.

The per-iteration work is O(fft_size^2): subtract the newly weighted basis
contribution from the residual spectrum (a circular shift of the weight
spectrum, no FFT needed) and find the next selection argmax in the same
pass. Falls back to the pure-numpy implementation in fse.py when numba is
unavailable.
"""

import numpy as np

try:
    from numba import njit
except ImportError:  # pragma: no cover - numba is a declared dependency
    njit = None


def _greedy_select_py(R, W, wf, sumw, odc, iters):
    # Reference semantics live in fse._greedy_numpy; this body only exists
    # to be compiled. R is modified in place.
    n = R.shape[0]
    C = np.zeros((n, n), np.complex128)
    sel = np.empty((iters, 2), np.int64)
    nsel = 0
    best = -1.0
    by = 0
    bx = 0
    for y in range(n):
        for x in range(n):
            v = wf[y, x] * (R[y, x].real * R[y, x].real + R[y, x].imag * R[y, x].imag)
            if v > best:
                best = v
                by = y
                bx = x
    for _ in range(iters):
        if best <= 0.0:
            break
        ky = by
        kx = bx
        cky = (n - ky) % n
        ckx = (n - kx) % n
        dc = odc * R[ky, kx] / sumw
        selfconj = cky == ky and ckx == kx
        if selfconj:
            dc = complex(dc.real, 0.0)
            C[ky, kx] += dc
        else:
            C[ky, kx] += dc
            C[cky, ckx] += dc.conjugate()
        dcc = dc.conjugate()
        best = -1.0
        by = 0
        bx = 0
        for y in range(n):
            ys = y - ky
            if ys < 0:
                ys += n
            yc = y - cky
            if yc < 0:
                yc += n
            for x in range(n):
                xs = x - kx
                if xs < 0:
                    xs += n
                upd = dc * W[ys, xs]
                if not selfconj:
                    xc = x - ckx
                    if xc < 0:
                        xc += n
                    upd = upd + dcc * W[yc, xc]
                r = R[y, x] - upd
                R[y, x] = r
                v = wf[y, x] * (r.real * r.real + r.imag * r.imag)
                if v > best:
                    best = v
                    by = y
                    bx = x
        sel[nsel, 0] = ky
        sel[nsel, 1] = kx
        nsel += 1
    return C, sel[:nsel]


greedy_select = (
    njit(cache=True, nogil=True)(_greedy_select_py) if njit is not None else None
)
