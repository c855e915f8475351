import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "ci",
    derandomize=True,
    max_examples=50,
    suppress_health_check=[HealthCheck.too_slow],
    deadline=None,
)
settings.register_profile(
    "heavy",
    max_examples=500,
    suppress_health_check=[HealthCheck.too_slow],
    deadline=None,
)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "ci"))


def write_ppm(path, pixels):
    """Raw P6 writer independent of the package's reader."""
    arr = np.asarray(pixels, dtype=np.uint8)
    header = f"P6\n{arr.shape[1]} {arr.shape[0]}\n255\n".encode()
    path.write_bytes(header + arr.tobytes())


def write_pgm(path, values, maxval=255):
    arr = np.asarray(values)
    header = f"P5\n{arr.shape[1]} {arr.shape[0]}\n{maxval}\n".encode()
    dtype = np.uint8 if maxval < 256 else ">u2"
    path.write_bytes(header + arr.astype(dtype).tobytes())


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


def two_texture_image(size=64, noise=0.01, seed=7):
    """Left/right halves with distinct Lab colors plus tiny noise."""
    from tbes import RasterImage

    rng = np.random.default_rng(seed)
    data = np.zeros((size, size, 3))
    data[:, : size // 2] = [30.0, 8.0, 8.0]
    data[:, size // 2 :] = [70.0, -8.0, -8.0]
    data += rng.normal(0.0, noise, data.shape)
    truth = np.zeros((size, size), dtype=np.int32)
    truth[:, size // 2 :] = 1
    return RasterImage(data, "lab"), truth


def random_blob_mask(rng, height, width, n_rects=4, fill_holes=True):
    """Random 4-connected, optionally hole-free mask from overlapping rectangles."""
    from scipy import ndimage

    mask = np.zeros((height, width), dtype=bool)
    for _ in range(n_rects):
        r0 = int(rng.integers(0, height - 1))
        c0 = int(rng.integers(0, width - 1))
        r1 = int(rng.integers(r0 + 1, height + 1))
        c1 = int(rng.integers(c0 + 1, width + 1))
        mask[r0:r1, c0:c1] = True
    struct4 = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]], bool)
    comp, n = ndimage.label(mask, structure=struct4)
    if n == 0:
        mask[height // 2, width // 2] = True
        return mask
    sizes = ndimage.sum_labels(np.ones_like(comp), comp, index=range(1, n + 1))
    mask = comp == (1 + int(np.argmax(sizes)))
    if fill_holes:
        mask = ndimage.binary_fill_holes(mask)
    return mask


def cg_minimize(grad, dim, max_outer=40, tol=1e-13):
    """Conjugate-gradient minimizer for quadratic objectives.

    Uses only gradient evaluations; the Hessian action is recovered exactly
    from gradient differences (the gradient of a quadratic is affine).
    Restarts every `dim` steps to shed rounding noise.
    """
    theta = np.zeros(dim)
    for _ in range(max_outer):
        g = grad(theta)
        if np.linalg.norm(g) < tol:
            break
        d = -g
        for _ in range(dim):
            hd = grad(theta + d) - g
            denom = d @ hd
            if denom <= 0:
                break
            theta = theta - (g @ d) / denom * d
            g_new = grad(theta)
            if np.linalg.norm(g_new) < tol:
                g = g_new
                break
            d = -g_new + (g_new @ g_new) / (g @ g) * d
            g = g_new
    return theta


def four_boundary_pixels(mask):
    """Mask pixels with a 4-neighbor outside the mask (array edge counts)."""
    padded = np.pad(mask, 1, constant_values=False)
    inner = (
        padded[:-2, 1:-1] & padded[2:, 1:-1] & padded[1:-1, :-2] & padded[1:-1, 2:]
    )
    return mask & ~inner
