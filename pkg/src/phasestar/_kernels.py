"""Hot inner loops, each in two flavours.

Every kernel exists as an explicit loop compiled with ``numba.njit`` and as a
vectorised pure-numpy function with the same signature. The public name
(``laguerre_table``, ``theta_sum`` ...) is bound to one of them at import
time:

* numba is used when it imports and ``PHASESTAR_DISABLE_NUMBA`` is unset
  (or set to ``0``/``false``);
* otherwise the numpy versions are used.

Both sets stay importable as ``NUMBA_KERNELS`` / ``NUMPY_KERNELS`` so tests and
the benchmark can compare them directly.
"""
import os

import numpy as np

try:
    import numba

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None
    HAVE_NUMBA = False

_flag = os.environ.get("PHASESTAR_DISABLE_NUMBA", "").strip().lower()
USE_NUMBA = HAVE_NUMBA and _flag in ("", "0", "false", "no")
BACKEND = "numba" if USE_NUMBA else "numpy"

_threads = os.environ.get("PHASESTAR_NUM_THREADS")
if HAVE_NUMBA and _threads:
    numba.set_num_threads(max(1, min(int(_threads), numba.config.NUMBA_NUM_THREADS)))


def _jit(fn):
    if HAVE_NUMBA:
        return numba.njit(cache=True)(fn)
    return None


# --------------------------------------------------------------------------
# Laguerre polynomials L_0..L_n on an array, by the three-term recurrence
# --------------------------------------------------------------------------

def _laguerre_table_loop(n, x):
    out = np.empty((n + 1, x.size))
    for i in range(x.size):
        out[0, i] = 1.0
    if n >= 1:
        for i in range(x.size):
            out[1, i] = 1.0 - x[i]
    for k in range(1, n):
        for i in range(x.size):
            out[k + 1, i] = ((2 * k + 1 - x[i]) * out[k, i] - k * out[k - 1, i]) / (k + 1)
    return out


def _laguerre_table_numpy(n, x):
    out = np.empty((n + 1, x.size))
    out[0] = 1.0
    if n >= 1:
        out[1] = 1.0 - x
    for k in range(1, n):
        out[k + 1] = ((2 * k + 1 - x) * out[k] - k * out[k - 1]) / (k + 1)
    return out


# --------------------------------------------------------------------------
# Truncated theta series  sum_{|k|<=N} exp(i pi tau k^2 + 2 i k z)
# --------------------------------------------------------------------------

def _theta_sum_loop(z, tau, nmax):
    # term_{k+1} = term_k * q^(2k+1) * e^(+-2iz) with q = e^(i pi tau); both
    # factors stay bounded by the terms themselves, so nothing overflows
    out = np.empty(z.size, dtype=np.complex128)
    q = np.exp(1j * np.pi * tau)
    q2 = q * q
    for i in range(z.size):
        w = np.exp(2j * z[i])
        wi = np.exp(-2j * z[i])
        ratio = q
        up = 1.0 + 0.0j
        down = 1.0 + 0.0j
        acc = 1.0 + 0.0j
        for k in range(nmax):
            up *= ratio * w
            down *= ratio * wi
            acc += up + down
            ratio *= q2
        out[i] = acc
    return out


def _theta_sum_numpy(z, tau, nmax):
    k = np.arange(nmax, 0, -1)
    q = np.exp(1j * np.pi * tau * k * k)
    ph = 2j * np.outer(z, k)
    return (np.exp(ph) + np.exp(-ph)) @ q + 1.0


# --------------------------------------------------------------------------
# RK4 for  m y'' + c(t) y = w f(t)  with several initial conditions at once.
# cgrid/fgrid hold c and f at t0 + k*h/2, k = 0..2*steps.
# --------------------------------------------------------------------------

def _rk4_linear_loop(cgrid, fgrid, m, h, y0, forcing):
    steps = (cgrid.size - 1) // 2
    ns = y0.shape[0]
    traj = np.empty((ns, steps + 1, 2))
    for s in range(ns):
        y = y0[s, 0]
        v = y0[s, 1]
        w = forcing[s]
        traj[s, 0, 0] = y
        traj[s, 0, 1] = v
        for k in range(steps):
            c0 = cgrid[2 * k]
            c1 = cgrid[2 * k + 1]
            c2 = cgrid[2 * k + 2]
            f0 = w * fgrid[2 * k]
            f1 = w * fgrid[2 * k + 1]
            f2 = w * fgrid[2 * k + 2]
            k1y = v
            k1v = (f0 - c0 * y) / m
            k2y = v + 0.5 * h * k1v
            k2v = (f1 - c1 * (y + 0.5 * h * k1y)) / m
            k3y = v + 0.5 * h * k2v
            k3v = (f1 - c1 * (y + 0.5 * h * k2y)) / m
            k4y = v + h * k3v
            k4v = (f2 - c2 * (y + h * k3y)) / m
            y = y + h * (k1y + 2 * k2y + 2 * k3y + k4y) / 6.0
            v = v + h * (k1v + 2 * k2v + 2 * k3v + k4v) / 6.0
            traj[s, k + 1, 0] = y
            traj[s, k + 1, 1] = v
    return traj


def _rk4_linear_numpy(cgrid, fgrid, m, h, y0, forcing):
    steps = (cgrid.size - 1) // 2
    ns = y0.shape[0]
    traj = np.empty((ns, steps + 1, 2))
    y = y0[:, 0].astype(float)
    v = y0[:, 1].astype(float)
    w = np.asarray(forcing, dtype=float)
    traj[:, 0, 0] = y
    traj[:, 0, 1] = v
    for k in range(steps):
        c0, c1, c2 = cgrid[2 * k], cgrid[2 * k + 1], cgrid[2 * k + 2]
        f0, f1, f2 = w * fgrid[2 * k], w * fgrid[2 * k + 1], w * fgrid[2 * k + 2]
        k1y = v
        k1v = (f0 - c0 * y) / m
        k2y = v + 0.5 * h * k1v
        k2v = (f1 - c1 * (y + 0.5 * h * k1y)) / m
        k3y = v + 0.5 * h * k2v
        k3v = (f1 - c1 * (y + 0.5 * h * k2y)) / m
        k4y = v + h * k3v
        k4v = (f2 - c2 * (y + h * k3y)) / m
        y = y + h * (k1y + 2 * k2y + 2 * k3y + k4y) / 6.0
        v = v + h * (k1v + 2 * k2v + 2 * k3v + k4v) / 6.0
        traj[:, k + 1, 0] = y
        traj[:, k + 1, 1] = v
    return traj


# --------------------------------------------------------------------------
# Sign-change counting with a tolerance band around zero.
# phi[0] is the (excluded) left endpoint; start_sign is the sign just after it.
# --------------------------------------------------------------------------

def _zero_count_loop(phi, tol, start_sign):
    count = 0
    prev = start_sign
    in_band = False
    for k in range(1, phi.size):
        val = phi[k]
        if abs(val) <= tol:
            if not in_band:
                count += 1
                in_band = True
            continue
        s = 1.0 if val > 0 else -1.0
        if in_band:
            in_band = False
        elif s != prev:
            count += 1
        prev = s
    return count


def _zero_count_numpy(phi, tol, start_sign):
    vals = phi[1:]
    band = np.abs(vals) <= tol
    band_prev = np.concatenate(([False], band[:-1]))
    entries = int(np.count_nonzero(band & ~band_prev))
    sign = np.where(vals > 0, 1.0, -1.0)
    prev_sign = np.concatenate(([start_sign], sign[:-1]))
    plain = ~band & ~band_prev & (sign != prev_sign)
    return entries + int(np.count_nonzero(plain))


# --------------------------------------------------------------------------
# Trapezoid Fourier sum of a complex Gaussian on [-Q, Q]
#   out[j] = sum_k w_k exp(i (c0 s_k^2 + c1 s_k + c2) - i s_k freqs[j]),  s_k uniform
# --------------------------------------------------------------------------

def _gaussian_fourier_sum_loop(coef, half_width, nodes, freqs):
    # consecutive terms differ by a factor whose own ratio is the constant
    # exp(2i c0 h^2); the recurrence is re-anchored with a direct exp every
    # ANCHOR nodes to keep rounding from accumulating
    out = np.empty(freqs.size, dtype=np.complex128)
    h = 2.0 * half_width / (nodes - 1)
    step2 = np.exp(2j * coef[0] * h * h)
    for j in range(freqs.size):
        lin = coef[1] - freqs[j]
        acc = 0.0 + 0.0j
        term = 0.0 + 0.0j
        ratio = 0.0 + 0.0j
        for k in range(nodes):
            if k % 512 == 0:
                s = -half_width + k * h
                term = np.exp(1j * ((coef[0] * s + lin) * s + coef[2]))
                ratio = np.exp(1j * (coef[0] * (2 * s * h + h * h) + lin * h))
            if k == 0 or k == nodes - 1:
                acc += 0.5 * term
            else:
                acc += term
            term *= ratio
            ratio *= step2
        out[j] = acc * h
    return out


def _gaussian_fourier_sum_numpy(coef, half_width, nodes, freqs):
    s = np.linspace(-half_width, half_width, nodes)
    h = s[1] - s[0]
    w = np.full(nodes, h)
    w[0] *= 0.5
    w[-1] *= 0.5
    base = (coef[0] * s + coef[1]) * s + coef[2]
    freqs = np.asarray(freqs, dtype=np.float64)
    out = np.empty(freqs.size, dtype=np.complex128)
    chunk = max(1, 2 ** 22 // nodes)
    for start in range(0, freqs.size, chunk):
        ph = base[None, :] - np.outer(freqs[start:start + chunk], s)
        out[start:start + chunk] = np.exp(1j * ph) @ w
    return out


# --------------------------------------------------------------------------
# Direct (non-uniform) Fourier sum  out[j] = sum_k v[k] exp(-i nodes[k] freqs[j])
# --------------------------------------------------------------------------

def _fourier_sum_loop(values, nodes, freqs):
    out = np.empty(freqs.size, dtype=np.complex128)
    for j in range(freqs.size):
        acc = 0.0 + 0.0j
        w = freqs[j]
        for k in range(nodes.size):
            acc += values[k] * np.exp(-1j * nodes[k] * w)
        out[j] = acc
    return out


def _fourier_sum_numpy(values, nodes, freqs):
    out = np.empty(freqs.size, dtype=np.complex128)
    chunk = max(1, 2 ** 22 // max(nodes.size, 1))
    for start in range(0, freqs.size, chunk):
        w = freqs[start:start + chunk]
        out[start:start + chunk] = np.exp(-1j * np.outer(w, nodes)) @ values
    return out


# --------------------------------------------------------------------------
# 4D quadrature of the integral star product (see star.star_integral).
# result[i, j] = sum_{k,l} f2[k,l] E1[j,k] E2[i,l] G[2j-l+off, k-2i+off]
# --------------------------------------------------------------------------

def _star_integral_sum_loop(f2, ghat, e1, e2, n):
    nf = f2.shape[0]
    off = nf - 1
    out = np.zeros((n, n), dtype=np.complex128)
    for i in range(n):
        for j in range(n):
            acc = 0.0 + 0.0j
            for k in range(nf):
                row = e1[j, k]
                vi = k - 2 * i + off
                part = 0.0 + 0.0j
                for l in range(nf):
                    part += f2[k, l] * e2[i, l] * ghat[2 * j - l + off, vi]
                acc += row * part
            out[i, j] = acc
    return out


def _star_integral_sum_numpy(f2, ghat, e1, e2, n):
    nf = f2.shape[0]
    off = nf - 1
    k = np.arange(nf)
    l = np.arange(nf)
    out = np.empty((n, n), dtype=np.complex128)
    for i in range(n):
        fe = f2 * e2[i][None, :]                      # (k, l)
        vi = k - 2 * i + off                           # (k,)
        for j in range(n):
            ui = 2 * j - l + off                       # (l,)
            g = ghat[ui[None, :], vi[:, None]]         # (k, l)
            out[i, j] = e1[j] @ np.sum(fe * g, axis=1)
    return out


# --------------------------------------------------------------------------
# Two-slice path-integral star product: anti-diagonal sums
# S[i, d] = sum_{a-b = d} Af[i+a, -2b] Ag[i+b, 2a],   |a|,|b| <= r
# Tables are indexed [x index, m + n//2] for separations m in [-n/2, n/2).
# --------------------------------------------------------------------------

def _star_path_rows_loop(af, ag, r):
    n = af.shape[0]
    h = n // 2
    out = np.zeros((n, 4 * r + 1), dtype=np.complex128)
    for i in range(n):
        for a in range(-r, r + 1):
            ia = i + a
            if ia < 0 or ia >= n:
                continue
            for b in range(-r, r + 1):
                ib = i + b
                if ib < 0 or ib >= n:
                    continue
                out[i, a - b + 2 * r] += af[ia, -2 * b + h] * ag[ib, 2 * a + h]
    return out


def _star_path_rows_numpy(af, ag, r):
    n = af.shape[0]
    h = n // 2
    a = np.arange(-r, r + 1)
    d = (a[:, None] - a[None, :]).ravel() + 2 * r
    out = np.zeros((n, 4 * r + 1), dtype=np.complex128)
    for i in range(n):
        idx = i + a
        ok = (idx >= 0) & (idx < n)
        safe = np.clip(idx, 0, n - 1)
        fa = af[safe[:, None], (-2 * a + h)[None, :]] * ok[:, None]   # [a, b]
        gb = ag[safe[None, :], (2 * a + h)[:, None]] * ok[None, :]    # [a, b]
        prod = (fa * gb).ravel()
        out[i] = np.bincount(d, weights=prod.real, minlength=4 * r + 1) \
            + 1j * np.bincount(d, weights=prod.imag, minlength=4 * r + 1)
    return out


_NAMES = (
    "laguerre_table",
    "theta_sum",
    "rk4_linear",
    "zero_count",
    "fourier_sum",
    "gaussian_fourier_sum",
    "star_integral_sum",
    "star_path_rows",
)

NUMPY_KERNELS = {name: globals()[f"_{name}_numpy"] for name in _NAMES}
if HAVE_NUMBA:
    NUMBA_KERNELS = {name: _jit(globals()[f"_{name}_loop"]) for name in _NAMES}
else:  # pragma: no cover
    NUMBA_KERNELS = {}

_ACTIVE = NUMBA_KERNELS if USE_NUMBA else NUMPY_KERNELS

laguerre_table = _ACTIVE["laguerre_table"]
theta_sum = _ACTIVE["theta_sum"]
rk4_linear = _ACTIVE["rk4_linear"]
zero_count = _ACTIVE["zero_count"]
fourier_sum = _ACTIVE["fourier_sum"]
gaussian_fourier_sum = _ACTIVE["gaussian_fourier_sum"]
star_integral_sum = _ACTIVE["star_integral_sum"]
star_path_rows = _ACTIVE["star_path_rows"]
