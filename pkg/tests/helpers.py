"""Independent oracles shared by the test modules.

Everything here is computed from first principles (closed forms, brute
force, straight-line arithmetic) so the tests stay independent of the
implementation paths they check.
"""

import struct

import numpy as np


def gaussian_logpdf(points, mean=0.5, sigma=0.1):
    """Closed-form log density of an isotropic Gaussian, any dimension."""
    pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
    d = pts.shape[1]
    sq = ((pts - mean) ** 2).sum(axis=1)
    return -0.5 * d * np.log(2.0 * np.pi * sigma * sigma) - sq / (2.0 * sigma * sigma)


def gaussian_kl_vs_unit_box(sigma, d=2):
    """KL(N(mu, sigma^2 I) || U([0,1]^d)) for a Gaussian well inside the box.

    Equals the negative differential entropy -(d/2) log(2 pi e sigma^2)
    because the uniform log density on the unit box is 0; the truncated
    tail mass is negligible for the sigmas used in the tests.
    """
    return -0.5 * d * np.log(2.0 * np.pi * np.e * sigma * sigma)


def gaussian_peak_log_density(sigma, d=2):
    """Closed-form log density at the mean: -(d/2) log(2 pi sigma^2)."""
    return -0.5 * d * np.log(2.0 * np.pi * sigma * sigma)


def kde_log_density_bruteforce(samples, bandwidth, query):
    """Plain double-loop Gaussian KDE log density at one query point."""
    samples = np.asarray(samples, dtype=np.float64)
    n, d = samples.shape
    total = 0.0
    for i in range(n):
        sq = 0.0
        for j in range(d):
            diff = query[j] - samples[i, j]
            sq += diff * diff
        total += np.exp(-sq / (2.0 * bandwidth ** 2))
    return np.log(total / n * (2.0 * np.pi * bandwidth ** 2) ** (-d / 2.0))


def auroc_pair_counting(scores, labels):
    """AUROC by exhaustive pair counting, ties worth half a pair."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    pos = scores[labels == 1]
    neg = scores[labels == 0]
    wins = 0.0
    for p in pos:
        for q in neg:
            if p > q:
                wins += 1.0
            elif p == q:
                wins += 0.5
    return wins / (pos.size * neg.size)


def idx_image_bytes(images_uint8):
    """Serialize a (n, rows, cols) uint8 stack as an IDX image file."""
    arr = np.asarray(images_uint8, dtype=np.uint8)
    n, rows, cols = arr.shape
    return struct.pack(">IIII", 0x00000803, n, rows, cols) + arr.tobytes()


def idx_label_bytes(labels_uint8):
    """Serialize a label vector as an IDX label file."""
    arr = np.asarray(labels_uint8, dtype=np.uint8)
    return struct.pack(">II", 0x00000801, arr.size) + arr.tobytes()
