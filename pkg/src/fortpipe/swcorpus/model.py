"""Sequential golden oracle for the 2D shallow-water model.

Single-precision throughout: every arithmetic step is an IEEE binary32
operation, and the expression trees mirror the corpus source statement by
statement, so pipeline runs can be compared against this oracle bit for bit.
The time stepper is purely sequential by contract: canonical loop order is
ascending j then k (irrelevant for the map kernels, fixed for reductions).
"""

from __future__ import annotations

from typing import Dict, Tuple

import numpy as np

from ..errors import NonFiniteField
from .config import ModelParams

F = np.float32

State = Dict[str, np.ndarray]

FIELD_NAMES = ("eta", "u", "v", "un", "vn", "etan", "h", "h0", "wet")
OUTPUT_FIELDS = ("eta", "u", "v", "h")


def initial_state(p: ModelParams) -> State:
    """Flat basin at rest with a centred square surface pulse.

    The ghost ring is dry land (zero undisturbed depth), so the closed
    boundary also stops the filter from mixing in wall values.
    """
    shape = p.shape
    h0 = np.zeros(shape, dtype=np.float32)
    h0[1:p.ny + 1, 1:p.nx + 1] = F(p.depth)
    eta = np.zeros(shape, dtype=np.float32)
    j1, j2, k1, k2 = p.pulse_box()
    eta[j1:j2 + 1, k1:k2 + 1] = F(p.pulse_height)
    etan = eta.copy()
    h = h0 + eta
    wet = h > F(p.hmin)
    zeros = lambda: np.zeros(shape, dtype=np.float32)  # noqa: E731
    return {
        "eta": eta, "u": zeros(), "v": zeros(),
        "un": zeros(), "vn": zeros(), "etan": etan,
        "h": h, "h0": h0, "wet": wet,
    }


def dynamics_step(eta: np.ndarray, u: np.ndarray, v: np.ndarray, h: np.ndarray,
                  p: ModelParams) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Momentum under surface gradients plus upwind flux-form continuity.

    Face velocities on the closed domain boundary are forced to zero; ghost
    cells pass the previous values through unchanged.
    """
    dt, dx, dy, g = F(p.dt), F(p.dx), F(p.dy), F(p.g)
    ny, nx = p.ny, p.nx
    J, K = slice(1, ny + 1), slice(1, nx + 1)

    e_c = eta[J, K]
    e_e = eta[J, 2:nx + 2]
    e_w = eta[J, 0:nx]
    e_n = eta[2:ny + 2, K]
    e_s = eta[0:ny, K]

    ue = u[J, K] - dt * g * (e_e - e_c) / dx
    uw = u[J, 0:nx] - dt * g * (e_c - e_w) / dx
    vno = v[J, K] - dt * g * (e_n - e_c) / dy
    vso = v[0:ny, K] - dt * g * (e_c - e_s) / dy

    ue[:, nx - 1] = F(0.0)
    uw[:, 0] = F(0.0)
    vno[ny - 1, :] = F(0.0)
    vso[0, :] = F(0.0)

    uhe = np.where(ue > F(0.0), ue * h[J, K], ue * h[J, 2:nx + 2])
    uhw = np.where(uw > F(0.0), uw * h[J, 0:nx], uw * h[J, K])
    vhn = np.where(vno > F(0.0), vno * h[J, K], vno * h[2:ny + 2, K])
    vhs = np.where(vso > F(0.0), vso * h[0:ny, K], vso * h[J, K])

    etan_i = e_c - dt * ((uhe - uhw) + (vhn - vhs)) / dx

    un = u.copy()
    vn = v.copy()
    etan = eta.copy()
    un[J, K] = ue
    vn[J, K] = vno
    etan[J, K] = etan_i
    return un, vn, etan


def shapiro_step(etan: np.ndarray, wet: np.ndarray, eps: float, ny: int, nx: int) -> np.ndarray:
    """First-order Shapiro filter with dry-neighbour centre substitution.

    Neighbour terms sum pairwise, (east+west) + (north+south), so the float32
    result is invariant under both mirror reflections of the grid.
    """
    epsf = F(eps)
    J, K = slice(1, ny + 1), slice(1, nx + 1)
    e_c = etan[J, K]
    e1 = np.where(wet[J, 2:nx + 2], etan[J, 2:nx + 2], e_c)
    e2 = np.where(wet[J, 0:nx], etan[J, 0:nx], e_c)
    e3 = np.where(wet[2:ny + 2, K], etan[2:ny + 2, K], e_c)
    e4 = np.where(wet[0:ny, K], etan[0:ny, K], e_c)
    eta_f = etan.copy()
    eta_f[J, K] = (F(1.0) - epsf) * e_c + F(0.25) * epsf * ((e1 + e2) + (e3 + e4))
    return eta_f


def update_step(eta: np.ndarray, un: np.ndarray, vn: np.ndarray, h0: np.ndarray,
                hmin: float) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Depth, wet mask and velocity update; dry cells get zero velocity."""
    hminf = F(hmin)
    h = h0 + eta
    dry = h <= hminf
    wet = ~dry
    u = np.where(dry, F(0.0), un)
    v = np.where(dry, F(0.0), vn)
    return h, wet, u, v


def reference_step(state: State, p: ModelParams) -> State:
    """One sequential time step: dynamics, then filter, then update."""
    un, vn, etan = dynamics_step(state["eta"], state["u"], state["v"], state["h"], p)
    eta = shapiro_step(etan, state["wet"], p.eps, p.ny, p.nx)
    h, wet, u, v = update_step(eta, un, vn, state["h0"], p.hmin)
    return {
        "eta": eta, "u": u, "v": v,
        "un": un, "vn": vn, "etan": etan,
        "h": h, "h0": state["h0"], "wet": wet,
    }


def run_reference(p: ModelParams, nt: int = None, check_finite: bool = False) -> State:
    """Run `nt` steps (default: p.nt) from the standard initial condition."""
    state = initial_state(p)
    steps = p.nt if nt is None else nt
    for _ in range(steps):
        state = reference_step(state, p)
        if check_finite:
            assert_finite(state)
    return state


def assert_finite(state: State) -> None:
    for name in ("eta", "u", "v", "h", "un", "vn", "etan"):
        if not np.isfinite(state[name]).all():
            raise NonFiniteField(name)


def host_checksums(state: State, p: ModelParams) -> Dict[str, np.float32]:
    """Interior checksums in canonical order, matching the corpus epilogue.

    Accumulation is sequential float32 over ascending j then k; this is the
    fold the host program performs after the time loop.
    """
    sums = {name: F(0.0) for name in OUTPUT_FIELDS}
    for j in range(1, p.ny + 1):
        for k in range(1, p.nx + 1):
            for name in OUTPUT_FIELDS:
                sums[name] = F(sums[name] + state[name][j, k])
    return sums
