"""Pure-numpy reference kernels (fallback when the compiled extension is missing)."""

from __future__ import annotations

import numpy as np


def conv_pool_forward(x, w, b):
    """Valid 3x3 convolution fused with 2x2/2 max-pooling.

    x: (N, H, W) images; w: (F, 3, 3); b: (F,).
    Returns ``(zmax, argmax)`` with shapes (N, F, PH, PW): the largest
    convolution output of each pooling window and its slot 0..3 (row-major,
    first maximum wins). Any monotone activation applied to ``zmax`` equals
    pooling the activated feature map.
    """
    dtype = np.result_type(x, w)
    x = np.asarray(x, dtype=dtype)
    n, h, wd = x.shape
    f, kh, kw = w.shape
    oh, ow = h - kh + 1, wd - kw + 1
    ph, pw = oh // 2, ow // 2
    z = np.empty((n, f, 2 * ph, 2 * pw), dtype=dtype)
    z[...] = b[None, :, None, None]
    for ky in range(kh):
        for kx in range(kw):
            xs = x[:, ky:ky + 2 * ph, kx:kx + 2 * pw]
            z += w[None, :, ky, kx, None, None] * xs[:, None]
    win = z.reshape(n, f, ph, 2, pw, 2).transpose(0, 1, 2, 4, 3, 5).reshape(n, f, ph, pw, 4)
    argmax = np.argmax(win, axis=-1).astype(np.uint8)
    zmax = np.take_along_axis(win, argmax[..., None].astype(np.intp), axis=-1)[..., 0]
    return zmax, argmax


def conv_pool_backward(x, dz, argmax, kernel=3):
    """Weight and bias gradients of the fused layer.

    dz: (N, F, PH, PW) gradient w.r.t. the pooled pre-activation (the conv
    output at each window's argmax). Gradient reaches only the argmax slot.
    """
    dtype = np.result_type(x, dz)
    x = np.asarray(x, dtype=dtype)
    n, f, ph, pw = dz.shape
    dense = np.zeros((n, f, ph, 2, pw, 2), dtype=dtype)
    a = argmax.astype(np.intp)
    dy, dx = a // 2, a % 2
    ni, fi, ii, jj = np.indices(dz.shape, sparse=False)
    dense[ni, fi, ii, dy, jj, dx] = dz
    dense = dense.reshape(n, f, 2 * ph, 2 * pw)
    dw = np.empty((f, kernel, kernel), dtype=dtype)
    for ky in range(kernel):
        for kx in range(kernel):
            xs = x[:, ky:ky + 2 * ph, kx:kx + 2 * pw]
            dw[:, ky, kx] = np.einsum("nfij,nij->f", dense, xs)
    db = dz.sum(axis=(0, 2, 3))
    return dw, db
