"""Counter-based normal variates (Philox4x32-10 + a 128-layer ziggurat).

Every Gaussian increment is a pure function of ``(seed, path, index)``, so a
path's noise does not depend on which worker simulates it or on how many
paths are in the batch.
"""

from __future__ import annotations

from dataclasses import dataclass

import numba
import numpy as np

_M0 = np.uint64(0xD2511F53)
_M1 = np.uint64(0xCD9E8D57)
_W0 = np.uint64(0x9E3779B9)
_W1 = np.uint64(0xBB67AE85)
_MASK = np.uint64(0xFFFFFFFF)
_S32 = np.uint64(32)
_S5 = np.uint64(5)
_S6 = np.uint64(6)


@numba.njit(cache=True, nogil=True)
def philox4x32(c0, c1, c2, c3, k0, k1):
    """Philox4x32 with 10 rounds; all words are uint64 holding 32-bit values."""
    for r in range(10):
        p0 = _M0 * c0
        p1 = _M1 * c2
        hi0 = p0 >> _S32
        lo0 = p0 & _MASK
        hi1 = p1 >> _S32
        lo1 = p1 & _MASK
        c0 = (hi1 ^ c1 ^ k0) & _MASK
        c1 = lo1
        c2 = (hi0 ^ c3 ^ k1) & _MASK
        c3 = lo0
        k0 = (k0 + _W0) & _MASK
        k1 = (k1 + _W1) & _MASK
    return c0, c1, c2, c3


def _ziggurat_tables(n_layers: int = 128, r: float = 3.442619855899,
                     v: float = 9.91256303526217e-3):
    """Layer widths, acceptance thresholds and heights for the half-normal ziggurat."""
    f = lambda x: np.exp(-0.5 * x * x)  # noqa: E731
    xs = np.empty(n_layers + 1)
    xs[0] = v / f(r)
    xs[1] = r
    for i in range(1, n_layers):
        arg = v / xs[i] + f(xs[i])
        xs[i + 1] = np.sqrt(-2.0 * np.log(arg)) if arg < 1.0 else 0.0
    xs[n_layers] = 0.0
    width = xs[:n_layers].copy()
    inner = xs[1:].copy()
    ki = np.floor(inner / width * _TWO24).astype(np.uint64)
    wi = width / _TWO24
    fi = f(xs)
    fi[0] = f(r)  # base strip bottom height
    return ki, wi, fi, r


_TWO24 = 16777216.0
_ZKI, _ZWI, _ZFI, _ZR = _ziggurat_tables()
_S7 = np.uint64(7)
_S8 = np.uint64(8)
_M127 = np.uint64(127)
_ONE = np.uint64(1)
_EXTRA = np.uint64(0x80000000)
_TWO32 = 4294967296.0


@numba.njit(cache=True, nogil=True)
def _uniform32(w):
    return (w + 0.5) / _TWO32


@numba.njit(cache=True, nogil=True)
def _zig_slow(k0, k1, path, j, w):
    """Rejection branch: wedges and the tail, fed by a separate counter space."""
    pa = np.uint64(path)
    jj = np.uint64(j)
    attempt = np.uint64(0)
    while True:
        i = w & _M127
        neg = (w >> _S7) & _ONE
        x = np.float64(w >> _S8) * _ZWI[i]
        if (w >> _S8) < _ZKI[i]:
            return -x if neg else x
        e0, e1, e2, e3 = philox4x32(jj & _MASK, _EXTRA | attempt, pa & _MASK, pa >> _S32, k0, k1)
        attempt += _ONE
        if i == 0:
            # tail beyond r (Marsaglia)
            xt = -np.log(_uniform32(e0)) / _ZR
            yt = -np.log(_uniform32(e1))
            if yt + yt > xt * xt:
                return -(_ZR + xt) if neg else _ZR + xt
        elif _ZFI[i] + _uniform32(e0) * (_ZFI[i + 1] - _ZFI[i]) < np.exp(-0.5 * x * x):
            return -x if neg else x
        w = e2


@numba.njit(cache=True, nogil=True)
def normal_quad(k0, k1, path, block):
    """Four independent N(0, 1) draws for block ``block`` of path ``path``."""
    pr = np.uint64(block)
    pa = np.uint64(path)
    w = philox4x32(pr & _MASK, pr >> _S32, pa & _MASK, pa >> _S32, k0, k1)
    out0 = 0.0
    out1 = 0.0
    out2 = 0.0
    out3 = 0.0
    for c in range(4):
        wc = w[c]
        i = wc & _M127
        r = wc >> _S8
        if r < _ZKI[i]:
            z = np.float64(r) * _ZWI[i]
            if (wc >> _S7) & _ONE:
                z = -z
        else:
            z = _zig_slow(k0, k1, path, 4 * block + c, wc)
        if c == 0:
            out0 = z
        elif c == 1:
            out1 = z
        elif c == 2:
            out2 = z
        else:
            out3 = z
    return out0, out1, out2, out3


@numba.njit(cache=True, nogil=True)
def _fill_normals(k0, k1, path, out):
    n = out.size
    for i in range(0, n, 4):
        z = normal_quad(k0, k1, path, i // 4)
        for c in range(4):
            if i + c < n:
                out[i + c] = z[c]


def split_seed(seed: int) -> tuple[np.uint64, np.uint64]:
    seed = int(seed) & 0xFFFFFFFFFFFFFFFF
    return np.uint64(seed & 0xFFFFFFFF), np.uint64(seed >> 32)


@dataclass(frozen=True)
class PathStream:
    """The noise stream of a single path: normals ``z[k*m + j]`` for step k, channel j."""

    seed: int
    index: int

    def normals(self, n_steps: int, m: int = 1) -> np.ndarray:
        k0, k1 = split_seed(self.seed)
        out = np.empty(n_steps * m)
        _fill_normals(k0, k1, self.index, out)
        return out.reshape(n_steps, m)


@dataclass(frozen=True)
class RngPolicy:
    """Master seed plus the deterministic per-path stream rule."""

    master_seed: int = 20240101

    def stream_for(self, path_index: int) -> PathStream:
        return PathStream(self.master_seed, int(path_index))

    @property
    def key(self) -> tuple[np.uint64, np.uint64]:
        return split_seed(self.master_seed)
