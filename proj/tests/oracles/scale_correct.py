"""Per-window closed-form scale correction evaluated by direct loops.

For each window centered on a pixel (clipped to the image), over the cells
where both maps are valid:
  a = cov(D, D0) / (var(D) + eps_mean / n),  b = mean(D0) - a mean(D)
with eps_i = eps_edge where |central-difference grad D0| / (5-point mean) >= tau_e.
Per-pixel coefficients average all windows covering the pixel.
"""
import numpy as np

W, H, WIN = 12, 10, 5
EPS_EDGE, EPS_SMOOTH, TAU = 1e-3, 1e-1, 0.5


def maps():
    y, x = np.mgrid[0:H, 0:W].astype(float)
    d0 = 2.0 + 0.1 * np.sin(0.5 * x) + 0.05 * y
    d0[:, 8:] += 3.0
    d = 1.5 * d0 + 0.2 + 0.03 * np.cos(0.3 * x * y)
    v0 = np.ones((H, W), bool)
    v0[4, 3] = v0[2, 7] = False
    vd = np.ones((H, W), bool)
    vd[6, 1] = False
    return d, vd, d0, v0


def correct(d, vd, d0, v0):
    def at(xx, yy, x, y):
        if 0 <= xx < W and 0 <= yy < H and v0[yy, xx]:
            return d0[yy, xx]
        return d0[y, x]

    eps = np.full((H, W), EPS_SMOOTH)
    for y in range(H):
        for x in range(W):
            if not v0[y, x]:
                continue
            gx = 0.5 * (at(x + 1, y, x, y) - at(x - 1, y, x, y))
            gy = 0.5 * (at(x, y + 1, x, y) - at(x, y - 1, x, y))
            local = (at(x + 1, y, x, y) + at(x - 1, y, x, y) + at(x, y + 1, x, y) + at(x, y - 1, x, y) + d0[y, x]) / 5
            if np.hypot(gx, gy) / local >= TAU:
                eps[y, x] = EPS_EDGE
    r = WIN // 2
    A = np.zeros((H, W))
    B = np.zeros((H, W))
    joint = vd & v0
    for cy in range(H):
        for cx in range(W):
            sl = (slice(max(0, cy - r), min(H, cy + r + 1)), slice(max(0, cx - r), min(W, cx + r + 1)))
            m = joint[sl]
            xs, ys, es = d[sl][m], d0[sl][m], eps[sl][m]
            n = len(xs)
            var = (xs ** 2).mean() - xs.mean() ** 2
            cov = (xs * ys).mean() - xs.mean() * ys.mean()
            a = cov / (var + es.mean() / n)
            A[cy, cx], B[cy, cx] = a, ys.mean() - a * xs.mean()
    out = np.full((H, W), np.nan)
    for y in range(H):
        for x in range(W):
            if not vd[y, x]:
                continue
            sl = (slice(max(0, y - r), min(H, y + r + 1)), slice(max(0, x - r), min(W, x + r + 1)))
            out[y, x] = A[sl].mean() * d[y, x] + B[sl].mean()
    return out


out = correct(*maps())
for (x, y) in [(0, 0), (5, 4), (7, 2), (8, 5), (11, 9), (3, 4)]:
    print(x, y, repr(out[y, x]))
print("sum", repr(np.nansum(out)))
