"""Hot inner-loop kernels: explicit updates for u_t - lap(u) + |Du|^m = f.

Two interchangeable backends are provided for every kernel:

* a numba ``@njit`` scalar-loop version (default when numba imports), and
* a pure-numpy vectorized version.

Set the environment variable ``ERGODIC_HJ_DISABLE_NUMBA=1`` before import to
force the numpy path.  Both backends evaluate the same arithmetic expression
tree node by node, so results agree to the last bit for m = 2 and to a few
ulp for fractional exponents (libm pow implementations may differ).

Stencils:

* gradient term: Rouy-Tourin upwind, H = (sum_i max(D-,0)^2 + max(-D+,0)^2)^(m/2)
* diffusion: standard second differences
* box boundary (state-constraint handling): along the wall-normal axis the
  update keeps only the inward upwind gradient pair and drops the diffusion
  contribution, so the wall node equilibrates at the maximal inward slope
  f^(1/m).  This is the monotone closure: a one-sided second difference
  would carry a -2/h^2 coefficient on the inward neighbor and break the
  comparison principle at the wall
* torus: periodic index wraparound
"""

from __future__ import annotations

import os

import numpy as np


def _numba_disabled_by_env() -> bool:
    return os.environ.get("ERGODIC_HJ_DISABLE_NUMBA", "0").strip().lower() in (
        "1",
        "true",
        "yes",
    )


try:
    from numba import njit as _njit

    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba installed
    _HAVE_NUMBA = False

    def _njit(*args, **kwargs):
        def wrap(fn):
            return fn

        if args and callable(args[0]):
            return args[0]
        return wrap


NUMBA_AVAILABLE = _HAVE_NUMBA
NUMBA_ENABLED = _HAVE_NUMBA and not _numba_disabled_by_env()


# ---------------------------------------------------------------------------
# numpy backend
# ---------------------------------------------------------------------------


def _pow_half_m(q2, m):
    # q2 ** (m/2); the m == 2 branch avoids pow so results are exact
    if m == 2.0:
        return q2
    return q2 ** (0.5 * m)


def step_box_1d_numpy(u, f, dt, inv_h, inv_h2, m, out):
    n = u.shape[0]
    up = u[2:]
    uc = u[1:-1]
    um = u[:-2]
    lap = (up - 2.0 * uc + um) * inv_h2
    dm = (uc - um) * inv_h
    dp = (up - uc) * inv_h
    a = np.maximum(dm, 0.0)
    b = np.maximum(-dp, 0.0)
    q2 = a * a + b * b
    ham = _pow_half_m(q2, m)
    out[1:-1] = uc + dt * (lap - ham + f[1:-1])
    # state-constraint walls: inward upwind pair only, no wall-normal diffusion
    b0 = max(-((u[1] - u[0]) * inv_h), 0.0)
    q20 = b0 * b0
    ham0 = q20 if m == 2.0 else q20 ** (0.5 * m)
    out[0] = u[0] + dt * (0.0 - ham0 + f[0])
    an = max((u[n - 1] - u[n - 2]) * inv_h, 0.0)
    q2n = an * an
    hamn = q2n if m == 2.0 else q2n ** (0.5 * m)
    out[n - 1] = u[n - 1] + dt * (0.0 - hamn + f[n - 1])
    return out


def step_torus_1d_numpy(u, f, dt, inv_h, inv_h2, m, out):
    up = np.roll(u, -1)
    um = np.roll(u, 1)
    lap = (up - 2.0 * u + um) * inv_h2
    dm = (u - um) * inv_h
    dp = (up - u) * inv_h
    a = np.maximum(dm, 0.0)
    b = np.maximum(-dp, 0.0)
    q2 = a * a + b * b
    ham = _pow_half_m(q2, m)
    out[:] = u + dt * (lap - ham + f)
    return out


def _axis_terms_scalar(um, uc, up, inv_h, inv_h2):
    lap = (up - 2.0 * uc + um) * inv_h2
    a = max((uc - um) * inv_h, 0.0)
    b = max(-((up - uc) * inv_h), 0.0)
    return lap, a, b


def _edge_terms_scalar(uc, u1, inv_h, low):
    # wall-normal axis at a boundary node: inward upwind pair, no diffusion
    if low:
        b = max(-((u1 - uc) * inv_h), 0.0)
        a = 0.0
    else:
        a = max((uc - u1) * inv_h, 0.0)
        b = 0.0
    return 0.0, a, b


def step_box_2d_numpy(u, f, dt, inv_h, inv_h2, m, out):
    n0, n1 = u.shape
    uc = u[1:-1, 1:-1]
    lap = (
        (u[2:, 1:-1] - 2.0 * uc + u[:-2, 1:-1]) * inv_h2
        + (u[1:-1, 2:] - 2.0 * uc + u[1:-1, :-2]) * inv_h2
    )
    ax = np.maximum((uc - u[:-2, 1:-1]) * inv_h, 0.0)
    bx = np.maximum(-((u[2:, 1:-1] - uc) * inv_h), 0.0)
    ay = np.maximum((uc - u[1:-1, :-2]) * inv_h, 0.0)
    by = np.maximum(-((u[1:-1, 2:] - uc) * inv_h), 0.0)
    q2 = ax * ax + bx * bx + ay * ay + by * by
    ham = _pow_half_m(q2, m)
    out[1:-1, 1:-1] = uc + dt * (lap - ham + f[1:-1, 1:-1])
    # boundary strip: scalar loop (cheap, O(n) nodes) with identical arithmetic
    for i in range(n0):
        on_i = i == 0 or i == n0 - 1
        if on_i:
            js = range(n1)
        else:
            js = (0, n1 - 1)
        for j in js:
            if i == 0:
                lx, axv, bxv = _edge_terms_scalar(u[0, j], u[1, j], inv_h, True)
            elif i == n0 - 1:
                lx, axv, bxv = _edge_terms_scalar(
                    u[n0 - 1, j], u[n0 - 2, j], inv_h, False
                )
            else:
                lx, axv, bxv = _axis_terms_scalar(
                    u[i - 1, j], u[i, j], u[i + 1, j], inv_h, inv_h2
                )
            if j == 0:
                ly, ayv, byv = _edge_terms_scalar(u[i, 0], u[i, 1], inv_h, True)
            elif j == n1 - 1:
                ly, ayv, byv = _edge_terms_scalar(
                    u[i, n1 - 1], u[i, n1 - 2], inv_h, False
                )
            else:
                ly, ayv, byv = _axis_terms_scalar(
                    u[i, j - 1], u[i, j], u[i, j + 1], inv_h, inv_h2
                )
            q2v = axv * axv + bxv * bxv + ayv * ayv + byv * byv
            hamv = q2v if m == 2.0 else q2v ** (0.5 * m)
            out[i, j] = u[i, j] + dt * ((lx + ly) - hamv + f[i, j])
    return out


def step_torus_2d_numpy(u, f, dt, inv_h, inv_h2, m, out):
    uxp = np.roll(u, -1, axis=0)
    uxm = np.roll(u, 1, axis=0)
    uyp = np.roll(u, -1, axis=1)
    uym = np.roll(u, 1, axis=1)
    lap = (uxp - 2.0 * u + uxm) * inv_h2 + (uyp - 2.0 * u + uym) * inv_h2
    ax = np.maximum((u - uxm) * inv_h, 0.0)
    bx = np.maximum(-((uxp - u) * inv_h), 0.0)
    ay = np.maximum((u - uym) * inv_h, 0.0)
    by = np.maximum(-((uyp - u) * inv_h), 0.0)
    q2 = ax * ax + bx * bx + ay * ay + by * by
    ham = _pow_half_m(q2, m)
    out[:, :] = u + dt * (lap - ham + f)
    return out


def heat_step_dirichlet_1d_numpy(w, pot, dt, inv_h2, out):
    # w_t = lap(w) - pot*w with w pinned to zero on the boundary ring
    wc = w[1:-1]
    lap = (w[2:] - 2.0 * wc + w[:-2]) * inv_h2
    out[1:-1] = wc + dt * (lap - pot[1:-1] * wc)
    out[0] = 0.0
    out[-1] = 0.0
    return out


def heat_step_dirichlet_2d_numpy(w, pot, dt, inv_h2, out):
    wc = w[1:-1, 1:-1]
    lap = (
        (w[2:, 1:-1] - 2.0 * wc + w[:-2, 1:-1]) * inv_h2
        + (w[1:-1, 2:] - 2.0 * wc + w[1:-1, :-2]) * inv_h2
    )
    out[1:-1, 1:-1] = wc + dt * (lap - pot[1:-1, 1:-1] * wc)
    out[0, :] = 0.0
    out[-1, :] = 0.0
    out[:, 0] = 0.0
    out[:, -1] = 0.0
    return out


def max_onesided_gradient_numpy(u, inv_h):
    g = 0.0
    if u.ndim == 1:
        d = np.abs(np.diff(u)) * inv_h
        if d.size:
            g = float(d.max())
    else:
        d0 = np.abs(np.diff(u, axis=0)) * inv_h
        d1 = np.abs(np.diff(u, axis=1)) * inv_h
        g = max(float(d0.max()) if d0.size else 0.0, float(d1.max()) if d1.size else 0.0)
    return g


def max_onesided_gradient_torus_numpy(u, inv_h):
    if u.ndim == 1:
        d = np.abs(u - np.roll(u, 1)) * inv_h
        return float(d.max())
    d0 = np.abs(u - np.roll(u, 1, axis=0)) * inv_h
    d1 = np.abs(u - np.roll(u, 1, axis=1)) * inv_h
    return max(float(d0.max()), float(d1.max()))


# ---------------------------------------------------------------------------
# numba backend
# ---------------------------------------------------------------------------


@_njit(cache=True)
def step_box_1d_numba(u, f, dt, inv_h, inv_h2, m, out):  # pragma: no cover - jitted
    n = u.shape[0]
    for i in range(1, n - 1):
        lap = (u[i + 1] - 2.0 * u[i] + u[i - 1]) * inv_h2
        a = max((u[i] - u[i - 1]) * inv_h, 0.0)
        b = max(-((u[i + 1] - u[i]) * inv_h), 0.0)
        q2 = a * a + b * b
        ham = q2 if m == 2.0 else q2 ** (0.5 * m)
        out[i] = u[i] + dt * (lap - ham + f[i])
    b0 = max(-((u[1] - u[0]) * inv_h), 0.0)
    q20 = b0 * b0
    ham0 = q20 if m == 2.0 else q20 ** (0.5 * m)
    out[0] = u[0] + dt * (0.0 - ham0 + f[0])
    an = max((u[n - 1] - u[n - 2]) * inv_h, 0.0)
    q2n = an * an
    hamn = q2n if m == 2.0 else q2n ** (0.5 * m)
    out[n - 1] = u[n - 1] + dt * (0.0 - hamn + f[n - 1])
    return out


@_njit(cache=True)
def step_torus_1d_numba(u, f, dt, inv_h, inv_h2, m, out):  # pragma: no cover
    n = u.shape[0]
    for i in range(n):
        ip = i + 1 if i + 1 < n else 0
        im = i - 1 if i - 1 >= 0 else n - 1
        lap = (u[ip] - 2.0 * u[i] + u[im]) * inv_h2
        a = max((u[i] - u[im]) * inv_h, 0.0)
        b = max(-((u[ip] - u[i]) * inv_h), 0.0)
        q2 = a * a + b * b
        ham = q2 if m == 2.0 else q2 ** (0.5 * m)
        out[i] = u[i] + dt * (lap - ham + f[i])
    return out


@_njit(cache=True)
def step_box_2d_numba(u, f, dt, inv_h, inv_h2, m, out):  # pragma: no cover
    n0, n1 = u.shape
    for i in range(n0):
        for j in range(n1):
            if i == 0:
                lx = 0.0
                ax = 0.0
                bx = max(-((u[1, j] - u[0, j]) * inv_h), 0.0)
            elif i == n0 - 1:
                lx = 0.0
                ax = max((u[n0 - 1, j] - u[n0 - 2, j]) * inv_h, 0.0)
                bx = 0.0
            else:
                lx = (u[i + 1, j] - 2.0 * u[i, j] + u[i - 1, j]) * inv_h2
                ax = max((u[i, j] - u[i - 1, j]) * inv_h, 0.0)
                bx = max(-((u[i + 1, j] - u[i, j]) * inv_h), 0.0)
            if j == 0:
                ly = 0.0
                ay = 0.0
                by = max(-((u[i, 1] - u[i, 0]) * inv_h), 0.0)
            elif j == n1 - 1:
                ly = 0.0
                ay = max((u[i, n1 - 1] - u[i, n1 - 2]) * inv_h, 0.0)
                by = 0.0
            else:
                ly = (u[i, j + 1] - 2.0 * u[i, j] + u[i, j - 1]) * inv_h2
                ay = max((u[i, j] - u[i, j - 1]) * inv_h, 0.0)
                by = max(-((u[i, j + 1] - u[i, j]) * inv_h), 0.0)
            q2 = ax * ax + bx * bx + ay * ay + by * by
            ham = q2 if m == 2.0 else q2 ** (0.5 * m)
            out[i, j] = u[i, j] + dt * ((lx + ly) - ham + f[i, j])
    return out


@_njit(cache=True)
def step_torus_2d_numba(u, f, dt, inv_h, inv_h2, m, out):  # pragma: no cover
    n0, n1 = u.shape
    for i in range(n0):
        ip = i + 1 if i + 1 < n0 else 0
        im = i - 1 if i - 1 >= 0 else n0 - 1
        for j in range(n1):
            jp = j + 1 if j + 1 < n1 else 0
            jm = j - 1 if j - 1 >= 0 else n1 - 1
            lap = (u[ip, j] - 2.0 * u[i, j] + u[im, j]) * inv_h2 + (
                u[i, jp] - 2.0 * u[i, j] + u[i, jm]
            ) * inv_h2
            ax = max((u[i, j] - u[im, j]) * inv_h, 0.0)
            bx = max(-((u[ip, j] - u[i, j]) * inv_h), 0.0)
            ay = max((u[i, j] - u[i, jm]) * inv_h, 0.0)
            by = max(-((u[i, jp] - u[i, j]) * inv_h), 0.0)
            q2 = ax * ax + bx * bx + ay * ay + by * by
            ham = q2 if m == 2.0 else q2 ** (0.5 * m)
            out[i, j] = u[i, j] + dt * (lap - ham + f[i, j])
    return out


@_njit(cache=True)
def heat_step_dirichlet_1d_numba(w, pot, dt, inv_h2, out):  # pragma: no cover
    n = w.shape[0]
    for i in range(1, n - 1):
        lap = (w[i + 1] - 2.0 * w[i] + w[i - 1]) * inv_h2
        out[i] = w[i] + dt * (lap - pot[i] * w[i])
    out[0] = 0.0
    out[n - 1] = 0.0
    return out


@_njit(cache=True)
def heat_step_dirichlet_2d_numba(w, pot, dt, inv_h2, out):  # pragma: no cover
    n0, n1 = w.shape
    for i in range(1, n0 - 1):
        for j in range(1, n1 - 1):
            lap = (w[i + 1, j] - 2.0 * w[i, j] + w[i - 1, j]) * inv_h2 + (
                w[i, j + 1] - 2.0 * w[i, j] + w[i, j - 1]
            ) * inv_h2
            out[i, j] = w[i, j] + dt * (lap - pot[i, j] * w[i, j])
    for i in range(n0):
        out[i, 0] = 0.0
        out[i, n1 - 1] = 0.0
    for j in range(n1):
        out[0, j] = 0.0
        out[n0 - 1, j] = 0.0
    return out


# ---------------------------------------------------------------------------
# dispatch table
# ---------------------------------------------------------------------------

if NUMBA_ENABLED:
    step_box_1d = step_box_1d_numba
    step_box_2d = step_box_2d_numba
    step_torus_1d = step_torus_1d_numba
    step_torus_2d = step_torus_2d_numba
    heat_step_dirichlet_1d = heat_step_dirichlet_1d_numba
    heat_step_dirichlet_2d = heat_step_dirichlet_2d_numba
else:
    step_box_1d = step_box_1d_numpy
    step_box_2d = step_box_2d_numpy
    step_torus_1d = step_torus_1d_numpy
    step_torus_2d = step_torus_2d_numpy
    heat_step_dirichlet_1d = heat_step_dirichlet_1d_numpy
    heat_step_dirichlet_2d = heat_step_dirichlet_2d_numpy

max_onesided_gradient = max_onesided_gradient_numpy
max_onesided_gradient_torus = max_onesided_gradient_torus_numpy


def backend_name() -> str:
    return "numba" if NUMBA_ENABLED else "numpy"


def vhj_step(u, f, dt, h, m, periodic, out=None):
    """One explicit update of u_t - lap(u) + |Du|^m = f on raw arrays.

    Dispatches on dimension and boundary handling; ``out`` is allocated when
    not supplied.  Callers are responsible for the CFL restriction.
    """
    if out is None:
        out = np.empty_like(u)
    inv_h = 1.0 / h
    inv_h2 = inv_h * inv_h
    if u.ndim == 1:
        fn = step_torus_1d if periodic else step_box_1d
    elif u.ndim == 2:
        fn = step_torus_2d if periodic else step_box_2d
    else:
        raise ValueError(f"unsupported dimension: {u.ndim}")
    fn(u, f, dt, inv_h, inv_h2, m, out)
    return out


def heat_step(w, pot, dt, h, out=None):
    """One explicit update of w_t = lap(w) - pot*w with zero-Dirichlet closure."""
    if out is None:
        out = np.empty_like(w)
    inv_h2 = 1.0 / (h * h)
    if w.ndim == 1:
        heat_step_dirichlet_1d(w, pot, dt, inv_h2, out)
    elif w.ndim == 2:
        heat_step_dirichlet_2d(w, pot, dt, inv_h2, out)
    else:
        raise ValueError(f"unsupported dimension: {w.ndim}")
    return out
