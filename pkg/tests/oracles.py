"""Independent brute-force oracles used to derive expected values.

These stay deliberately naive and separate from the implementation paths
they check: a scalar float64 shallow-water step, a direct index-arithmetic
stencil-tuple generator, and a reference linearizer.
"""

from __future__ import annotations

from typing import List, Sequence, Tuple

import numpy as np


def dynamics_f64(eta, u, v, h, ny, nx, dt, dx, dy, g):
    """Scalar double-precision dynamics step (interior only, closed walls)."""
    eta = eta.astype(np.float64)
    u = u.astype(np.float64)
    v = v.astype(np.float64)
    h = h.astype(np.float64)
    un = u.copy()
    vn = v.copy()
    etan = eta.copy()
    for j in range(1, ny + 1):
        for k in range(1, nx + 1):
            ue = u[j, k] - dt * g * (eta[j, k + 1] - eta[j, k]) / dx
            uw = u[j, k - 1] - dt * g * (eta[j, k] - eta[j, k - 1]) / dx
            vno = v[j, k] - dt * g * (eta[j + 1, k] - eta[j, k]) / dy
            vso = v[j - 1, k] - dt * g * (eta[j, k] - eta[j - 1, k]) / dy
            if k == nx:
                ue = 0.0
            if k == 1:
                uw = 0.0
            if j == ny:
                vno = 0.0
            if j == 1:
                vso = 0.0
            uhe = ue * h[j, k] if ue > 0 else ue * h[j, k + 1]
            uhw = uw * h[j, k - 1] if uw > 0 else uw * h[j, k]
            vhn = vno * h[j, k] if vno > 0 else vno * h[j + 1, k]
            vhs = vso * h[j - 1, k] if vso > 0 else vso * h[j, k]
            un[j, k] = ue
            vn[j, k] = vno
            etan[j, k] = eta[j, k] - dt * ((uhe - uhw) + (vhn - vhs)) / dx
    return un, vn, etan


def stencil_tuples(values: Sequence, offsets: Sequence[int],
                   boundary: str = "clamp") -> List[Tuple]:
    """All Size stencil tuples by direct index arithmetic."""
    size = len(values)
    out = []
    for p in range(size):
        taps = []
        for d in sorted(offsets):
            q = p + d
            if 0 <= q < size:
                taps.append(values[q])
            elif boundary == "clamp":
                taps.append(values[0 if q < 0 else size - 1])
            else:
                taps.append(type(values[0])(0))
        out.append(tuple(taps))
    return out


def linear_offsets_5pt(row_stride: int) -> set:
    """Five-point stencil linearized on a row-major grid."""
    return {-row_stride, -1, 0, 1, row_stride}
