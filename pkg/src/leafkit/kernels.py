"""Hot numeric kernels, in jitted and vectorized-numpy twin variants.

Two loops dominate end-to-end runtime: the per-pixel hue-shift round trip
(RGB -> hexcone HSV -> shifted hue -> RGB) inside augmentation, and the
query x prototype distance matrix inside nearest-prototype classification.
Each ships as a numba loop plus a pure-numpy fallback; the active variant
is picked by ``leafkit.accel`` (see the LEAFKIT_BACKEND env flag). The
pixel kernels evaluate the identical float64 expression tree branch by
branch, which keeps their outputs bit-identical across backends; the
distance kernels differ only in summation order, so they agree to within
float rounding (a few ulps). The equivalence tests assert both.

Pixel kernels take and return float64 arrays with values normalized to
[0, 1]; quantization back to bytes happens in the caller.
"""

from __future__ import annotations

import numpy as np

from .accel import jit_kernel, numba_enabled


def _hue_shift_loop(rgb: np.ndarray, degrees: float) -> np.ndarray:
    out = np.empty_like(rgb)
    n = rgb.shape[0]
    for i in range(n):
        r = rgb[i, 0]
        g = rgb[i, 1]
        b = rgb[i, 2]
        mx = max(r, g, b)
        mn = min(r, g, b)
        c = mx - mn
        if c == 0.0:
            h = 0.0
        elif mx == r:
            h = (60.0 * ((g - b) / c)) % 360.0
        elif mx == g:
            h = 60.0 * ((b - r) / c) + 120.0
        else:
            h = 60.0 * ((r - g) / c) + 240.0
        s = 0.0 if mx == 0.0 else c / mx
        v = mx

        h = (h + degrees) % 360.0

        hp = h / 60.0
        sector = int(hp) % 6
        f = hp - int(hp)
        p = v * (1.0 - s)
        q = v * (1.0 - s * f)
        t = v * (1.0 - s * (1.0 - f))
        if sector == 0:
            r2, g2, b2 = v, t, p
        elif sector == 1:
            r2, g2, b2 = q, v, p
        elif sector == 2:
            r2, g2, b2 = p, v, t
        elif sector == 3:
            r2, g2, b2 = p, q, v
        elif sector == 4:
            r2, g2, b2 = t, p, v
        else:
            r2, g2, b2 = v, p, q
        out[i, 0] = r2
        out[i, 1] = g2
        out[i, 2] = b2
    return out


_hue_shift_jit = jit_kernel(_hue_shift_loop)


def _hue_shift_vectorized(rgb: np.ndarray, degrees: float) -> np.ndarray:
    r, g, b = rgb[:, 0], rgb[:, 1], rgb[:, 2]
    mx = np.maximum(np.maximum(r, g), b)
    mn = np.minimum(np.minimum(r, g), b)
    c = mx - mn
    safe_c = np.where(c == 0.0, 1.0, c)
    h_r = (60.0 * ((g - b) / safe_c)) % 360.0
    h_g = 60.0 * ((b - r) / safe_c) + 120.0
    h_b = 60.0 * ((r - g) / safe_c) + 240.0
    h = np.where(mx == r, h_r, np.where(mx == g, h_g, h_b))
    h = np.where(c == 0.0, 0.0, h)
    safe_mx = np.where(mx == 0.0, 1.0, mx)
    s = np.where(mx == 0.0, 0.0, c / safe_mx)
    v = mx

    h = (h + degrees) % 360.0

    hp = h / 60.0
    ip = hp.astype(np.int64)
    sector = ip % 6
    f = hp - ip
    p = v * (1.0 - s)
    q = v * (1.0 - s * f)
    t = v * (1.0 - s * (1.0 - f))
    r2 = np.select([sector == 0, sector == 1, sector == 2,
                    sector == 3, sector == 4], [v, q, p, p, t], default=v)
    g2 = np.select([sector == 0, sector == 1, sector == 2,
                    sector == 3, sector == 4], [t, v, v, q, p], default=p)
    b2 = np.select([sector == 0, sector == 1, sector == 2,
                    sector == 3, sector == 4], [p, p, t, v, v], default=q)
    return np.stack([r2, g2, b2], axis=1)


def hue_shift_pixels(rgb: np.ndarray, degrees: float) -> np.ndarray:
    """Shift the hue of normalized (N, 3) pixels by ``degrees`` on the wheel."""
    rgb = np.ascontiguousarray(rgb, dtype=np.float64)
    if numba_enabled():
        return _hue_shift_jit(rgb, float(degrees))
    return _hue_shift_vectorized(rgb, float(degrees))


def _distance_matrix_loop(queries: np.ndarray, protos: np.ndarray) -> np.ndarray:
    nq = queries.shape[0]
    nk = protos.shape[0]
    d = queries.shape[1]
    out = np.empty((nq, nk), dtype=np.float64)
    for i in range(nq):
        for j in range(nk):
            acc = 0.0
            for k in range(d):
                diff = queries[i, k] - protos[j, k]
                acc += diff * diff
            out[i, j] = np.sqrt(acc)
    return out


_distance_matrix_jit = jit_kernel(_distance_matrix_loop)


def _distance_matrix_vectorized(queries: np.ndarray, protos: np.ndarray) -> np.ndarray:
    diff = queries[:, None, :] - protos[None, :, :]
    return np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))


def distance_matrix(queries: np.ndarray, protos: np.ndarray) -> np.ndarray:
    """Euclidean distances between every query row and every prototype row."""
    queries = np.ascontiguousarray(queries, dtype=np.float64)
    protos = np.ascontiguousarray(protos, dtype=np.float64)
    if numba_enabled():
        return _distance_matrix_jit(queries, protos)
    return _distance_matrix_vectorized(queries, protos)
