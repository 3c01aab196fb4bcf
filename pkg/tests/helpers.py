"""Shared test oracles: finite differences and naive reference implementations.

These stay deliberately independent of the library code paths they check.
"""

import numpy as np


def central_difference(f, x, h=1e-5):
    """Gradient of scalar f at x by central differences, elementwise."""
    x = np.asarray(x, dtype=np.float64)
    g = np.zeros_like(x)
    flat = x.reshape(-1)
    gflat = g.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        fp = f(x)
        flat[i] = orig - h
        fm = f(x)
        flat[i] = orig
        gflat[i] = (fp - fm) / (2.0 * h)
    return g


def relative_gradient_error(autodiff_grad, fd_grad, floor=1e-8):
    return np.max(np.abs(autodiff_grad - fd_grad) / (np.abs(fd_grad) + floor))


def conv2d_loops(x, w, stride=1, pad=0, groups=1):
    """Direct nested-loop 2D cross-correlation with zero padding."""
    c_in, h, wd = x.shape
    c_out, c_in_g, k, _ = w.shape
    ho = (h + 2 * pad - k) // stride + 1
    wo = (wd + 2 * pad - k) // stride + 1
    xp = np.zeros((c_in, h + 2 * pad, wd + 2 * pad))
    xp[:, pad : pad + h, pad : pad + wd] = x
    out = np.zeros((c_out, ho, wo))
    cpg_out = c_out // groups
    for o in range(c_out):
        grp = o // cpg_out
        for i in range(ho):
            for j in range(wo):
                acc = 0.0
                for c in range(c_in_g):
                    cin = grp * c_in_g + c
                    for a in range(k):
                        for b in range(k):
                            acc += w[o, c, a, b] * xp[cin, i * stride + a, j * stride + b]
                out[o, i, j] = acc
    return out


def away_from_kinks(rng, shape, h=1e-5, margin=20.0):
    """Uniform values in [-1, 1] resampled away from 0 so that finite
    differences of piecewise-linear activations stay on one branch."""
    x = rng.uniform(-1.0, 1.0, size=shape)
    while np.any(np.abs(x) < margin * h):
        bad = np.abs(x) < margin * h
        x[bad] = rng.uniform(-1.0, 1.0, size=bad.sum())
    return x
