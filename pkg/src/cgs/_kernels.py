"""Numba inner loops for rasterization, gradients, and the L1 loss.

Determinism rules observed throughout:
  * fastmath stays off so IEEE semantics and operation order are preserved;
  * the forward pass parallelizes over tiles, and every pixel accumulates
    its Gaussians in ascending index order, so results are bit-identical
    for any thread count and match the naive per-pixel loop;
  * the backward pass parallelizes over Gaussians, each reduced over its
    own footprint in row-major order by a single worker;
  * parallel reductions write per-row/per-item partials that are combined
    by a fixed-order summation outside the parallel region.
"""

import numpy as np
from numba import njit, prange


@njit(cache=True, parallel=True, fastmath=False)
def forward_tiled(starts, items, tile_size, tiles_x, tiles_y, height, width,
                  means, conics, alphas, colors, region_ids, labels, r2, out):
    ntiles = tiles_x * tiles_y
    for t in prange(ntiles):
        ty = t // tiles_x
        tx = t - ty * tiles_x
        y_lo = ty * tile_size
        x_lo = tx * tile_size
        y_hi = min(y_lo + tile_size, height)
        x_hi = min(x_lo + tile_size, width)
        s0 = starts[t]
        s1 = starts[t + 1]
        for py in range(y_lo, y_hi):
            pyc = py + 0.5
            for px in range(x_lo, x_hi):
                pxc = px + 0.5
                lab = labels[py, px]
                acc_r = 0.0
                acc_g = 0.0
                acc_b = 0.0
                for k in range(s0, s1):
                    i = items[k]
                    if region_ids[i] != 0 and region_ids[i] != lab:
                        continue
                    dx = pxc - means[i, 0]
                    dy = pyc - means[i, 1]
                    q = conics[i, 0] * dx * dx + 2.0 * conics[i, 1] * dx * dy \
                        + conics[i, 2] * dy * dy
                    if q > r2:
                        continue
                    w = np.exp(-0.5 * q)
                    aw = alphas[i] * w
                    acc_r += aw * colors[i, 0]
                    acc_g += aw * colors[i, 1]
                    acc_b += aw * colors[i, 2]
                out[py, px, 0] = acc_r
                out[py, px, 1] = acc_g
                out[py, px, 2] = acc_b


@njit(cache=True, fastmath=False)
def forward_naive(height, width, means, conics, alphas, colors,
                  region_ids, labels, out):
    n = means.shape[0]
    for py in range(height):
        pyc = py + 0.5
        for px in range(width):
            pxc = px + 0.5
            lab = labels[py, px]
            acc_r = 0.0
            acc_g = 0.0
            acc_b = 0.0
            for i in range(n):
                if region_ids[i] != 0 and region_ids[i] != lab:
                    continue
                dx = pxc - means[i, 0]
                dy = pyc - means[i, 1]
                q = conics[i, 0] * dx * dx + 2.0 * conics[i, 1] * dx * dy \
                    + conics[i, 2] * dy * dy
                w = np.exp(-0.5 * q)
                aw = alphas[i] * w
                acc_r += aw * colors[i, 0]
                acc_g += aw * colors[i, 1]
                acc_b += aw * colors[i, 2]
            out[py, px, 0] = acc_r
            out[py, px, 1] = acc_g
            out[py, px, 2] = acc_b


@njit(cache=True, parallel=True, fastmath=False)
def backward_per_gaussian(bx0, bx1, by0, by1, means, chol, conics, alphas,
                          colors, region_ids, labels, dl_dpix, rendered,
                          clamp_active, r2,
                          grad_means, grad_chol, grad_colors, grad_alphas):
    n = means.shape[0]
    for i in prange(n):
        mx = means[i, 0]
        my = means[i, 1]
        l11 = chol[i, 0]
        l21 = chol[i, 1]
        l22 = chol[i, 2]
        ca = conics[i, 0]
        cb = conics[i, 1]
        cc = conics[i, 2]
        alpha = alphas[i]
        cr = colors[i, 0]
        cg = colors[i, 1]
        cb_col = colors[i, 2]
        rid = region_ids[i]
        g_mx = 0.0
        g_my = 0.0
        g_l11 = 0.0
        g_l21 = 0.0
        g_l22 = 0.0
        g_cr = 0.0
        g_cg = 0.0
        g_cb = 0.0
        g_a = 0.0
        for py in range(by0[i], by1[i] + 1):
            pyc = py + 0.5
            dy = pyc - my
            for px in range(bx0[i], bx1[i] + 1):
                if rid != 0 and rid != labels[py, px]:
                    continue
                dx = (px + 0.5) - mx
                q = ca * dx * dx + 2.0 * cb * dx * dy + cc * dy * dy
                if q > r2:
                    continue
                w = np.exp(-0.5 * q)
                gr = dl_dpix[py, px, 0]
                gg = dl_dpix[py, px, 1]
                gb = dl_dpix[py, px, 2]
                if clamp_active:
                    if rendered[py, px, 0] < 0.0 or rendered[py, px, 0] > 1.0:
                        gr = 0.0
                    if rendered[py, px, 1] < 0.0 or rendered[py, px, 1] > 1.0:
                        gg = 0.0
                    if rendered[py, px, 2] < 0.0 or rendered[py, px, 2] > 1.0:
                        gb = 0.0
                s = gr * cr + gg * cg + gb * cb_col
                aw = alpha * w
                g_cr += gr * aw
                g_cg += gg * aw
                g_cb += gb * aw
                g_a += w * s
                dl_dq = -0.5 * aw * s
                vx = ca * dx + cb * dy
                vy = cb * dx + cc * dy
                g_mx += dl_dq * (-2.0 * vx)
                g_my += dl_dq * (-2.0 * vy)
                g_l11 += dl_dq * (-2.0 * (vx * vx * l11 + vx * vy * l21))
                g_l21 += dl_dq * (-2.0 * (vx * vy * l11 + vy * vy * l21))
                g_l22 += dl_dq * (-2.0 * (vy * vy * l22))
        grad_means[i, 0] = g_mx
        grad_means[i, 1] = g_my
        grad_chol[i, 0] = g_l11
        grad_chol[i, 1] = g_l21
        grad_chol[i, 2] = g_l22
        grad_colors[i, 0] = g_cr
        grad_colors[i, 1] = g_cg
        grad_colors[i, 2] = g_cb
        grad_alphas[i] = g_a


@njit(cache=True, fastmath=False)
def bin_tiles(tx0, tx1, ty0, ty1, tiles_x, tiles_y):
    """CSR tile lists; Gaussian indices ascend within each tile."""
    n = tx0.shape[0]
    ntiles = tiles_x * tiles_y
    starts = np.zeros(ntiles + 1, np.int64)
    for i in range(n):
        if tx0[i] > tx1[i] or ty0[i] > ty1[i]:
            continue
        for ty in range(ty0[i], ty1[i] + 1):
            base = ty * tiles_x
            for tx in range(tx0[i], tx1[i] + 1):
                starts[base + tx + 1] += 1
    for t in range(ntiles):
        starts[t + 1] += starts[t]
    items = np.empty(starts[ntiles], np.int64)
    cursor = starts[:ntiles].copy()
    for i in range(n):
        if tx0[i] > tx1[i] or ty0[i] > ty1[i]:
            continue
        for ty in range(ty0[i], ty1[i] + 1):
            base = ty * tiles_x
            for tx in range(tx0[i], tx1[i] + 1):
                t = base + tx
                items[cursor[t]] = i
                cursor[t] += 1
    return starts, items


@njit(cache=True, parallel=True, fastmath=False)
def l1_loss_grad(raw, target, clamp_active):
    """Row partials of sum |pred - gt| and d(mean abs error)/d(pred)."""
    height, width, channels = raw.shape
    scale = 1.0 / (height * width * channels)
    grad = np.empty_like(raw)
    partials = np.zeros(height)
    for py in prange(height):
        acc = 0.0
        for px in range(width):
            for ch in range(channels):
                v = raw[py, px, ch]
                if clamp_active:
                    if v < 0.0:
                        v = 0.0
                    elif v > 1.0:
                        v = 1.0
                r = v - target[py, px, ch]
                acc += abs(r)
                if r > 0.0:
                    grad[py, px, ch] = scale
                elif r < 0.0:
                    grad[py, px, ch] = -scale
                else:
                    grad[py, px, ch] = 0.0
        partials[py] = acc
    return partials, grad
