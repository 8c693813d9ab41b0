"""SSIM with an 11x11 Gaussian window (sigma 1.5) whose out-of-image weights
are dropped and renormalized. The interior mean is cross-checked against
scikit-image, whose windows never leave the image there."""
import numpy as np
from skimage.metrics import structural_similarity


def fixture(w, h, phase):
    y, x = np.mgrid[0:h, 0:w].astype(float)
    a = 0.5 + 0.3 * np.sin(0.7 * x + 1.3 * y + phase) + 0.1 * np.cos(0.37 * x * y)
    b = 0.5 + 0.25 * np.sin(0.6 * x + 1.4 * y + phase) + 0.12 * np.sin(0.5 * x - 0.2 * y)
    return a, b


def ssim_map(a, b, r=5, sigma=1.5, k1=0.01, k2=0.03):
    h, w = a.shape
    c1, c2 = k1 ** 2, k2 ** 2
    out = np.zeros_like(a)
    for y in range(h):
        for x in range(w):
            y0, y1, x0, x1 = max(0, y - r), min(h, y + r + 1), max(0, x - r), min(w, x + r + 1)
            gy = np.exp(-0.5 * (np.arange(y0, y1) - y) ** 2 / sigma ** 2)
            gx = np.exp(-0.5 * (np.arange(x0, x1) - x) ** 2 / sigma ** 2)
            wt = np.outer(gy, gx)
            wt /= wt.sum()
            pa, pb = a[y0:y1, x0:x1], b[y0:y1, x0:x1]
            ma, mb = (wt * pa).sum(), (wt * pb).sum()
            va = (wt * pa * pa).sum() - ma * ma
            vb = (wt * pb * pb).sum() - mb * mb
            cov = (wt * pa * pb).sum() - ma * mb
            out[y, x] = ((2 * ma * mb + c1) * (2 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2))
    return out


if __name__ == "__main__":
    a, b = fixture(32, 24, 0.0)
    m = ssim_map(a, b)
    ref = structural_similarity(a, b, gaussian_weights=True, sigma=1.5, use_sample_covariance=False,
                                data_range=1.0)
    assert abs(m[5:-5, 5:-5].mean() - ref) < 1e-12, (m[5:-5, 5:-5].mean(), ref)
    print("full", repr(m.mean()), "interior", repr(ref))
    a4, b4 = fixture(4, 4, 0.3)
    print("4x4", repr(ssim_map(a4, b4).mean()))
