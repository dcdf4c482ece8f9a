"""Independent reference computations used by the tests.

Nothing here imports the package's filtering code: the Laplacian reference
is built from explicit dense matrices, and the kernel-machine reference
solves a linear system directly.
"""

import numpy as np

BINOMIAL = np.array([1.0, 4.0, 6.0, 4.0, 1.0]) / 16.0


def _reflect(j, n):
    # half-sample symmetric extension: ... b a | a b c ... x y | y x ...
    while j < 0 or j >= n:
        j = -j - 1 if j < 0 else 2 * n - j - 1
    return j


def blur_matrix(n):
    """Dense ``n x n`` operator of the 5-tap binomial with reflection."""
    m = np.zeros((n, n))
    for i in range(n):
        for k, w in zip(range(-2, 3), BINOMIAL):
            m[i, _reflect(i + k, n)] += w
    return m


def reduce_matrix(n):
    """Blur then keep even samples: ``ceil(n/2) x n``."""
    return blur_matrix(n)[::2]


def expand_matrix(n):
    """Interpolate ``ceil(n/2)`` coarse samples onto ``n`` fine ones.

    Coarse sample ``k`` sits at fine position ``2k``; coarse samples outside
    the grid are mirrored (half-sample) on the coarse grid.  Each fine sample
    is ``sum_k 2 w(i - 2k) c_k``.
    """
    m = (n + 1) // 2
    e = np.zeros((n, m))
    for i in range(n):
        for k in range(-2, m + 2):
            d = i - 2 * k
            if abs(d) <= 2:
                e[i, _reflect(k, m)] += 2.0 * BINOMIAL[d + 2]
    return e


def laplacian_reference(frame, levels):
    """Bands and residual computed as explicit full matrix products."""
    bands = []
    cur = np.asarray(frame, dtype=float)
    for _ in range(levels):
        rows, cols = cur.shape
        low = reduce_matrix(rows) @ cur @ reduce_matrix(cols).T
        back = expand_matrix(rows) @ low @ expand_matrix(cols).T
        bands.append(cur - back)
        cur = low
    return bands, cur


def poly_kernel(a, b, gamma, c0, degree=3):
    return (gamma * np.asarray(a) @ np.asarray(b).T + c0) ** degree


def hard_margin_interpolant(x, y, gamma, c0, degree=3):
    """Solve ``[K 1; 1^T 0][beta; b] = [y; 0]`` for an exact interpolant.

    If the kernel matrix is nonsingular, ``f(x) = sum beta_j K(x_j, x) + b``
    reproduces the labels exactly, which proves the kernel can separate
    the points.  Returns ``(beta, b)``.
    """
    k = poly_kernel(x, x, gamma, c0, degree)
    n = len(y)
    system = np.zeros((n + 1, n + 1))
    system[:n, :n] = k
    system[:n, n] = 1.0
    system[n, :n] = 1.0
    rhs = np.concatenate([np.asarray(y, float), [0.0]])
    sol = np.linalg.solve(system, rhs)
    return sol[:n], sol[n]


def riesz_relative_error(approx, exact, threshold=0.1):
    """Relative L2 error of ``(r1, r2)`` over pixels whose exact amplitude
    is at least ``threshold`` times its maximum."""
    amp = np.sqrt(exact.i ** 2 + exact.r1 ** 2 + exact.r2 ** 2)
    sel = amp >= threshold * amp.max()
    diff = (approx.r1 - exact.r1) ** 2 + (approx.r2 - exact.r2) ** 2
    ref = exact.r1 ** 2 + exact.r2 ** 2
    return float(np.sqrt(diff[sel].sum() / ref[sel].sum()))


def dominant_cell_shifts(d_a, d_b, o, frac=0.5):
    """Cyclic argmax-bin offsets ``(b - a) mod o`` over the dominant cells.

    Dominant cells are those whose total mass, in either descriptor, is at
    least ``frac`` of the largest cell mass of that descriptor.
    """
    ha = np.asarray(d_a).reshape(-1, o)
    hb = np.asarray(d_b).reshape(-1, o)
    ma, mb = ha.sum(1), hb.sum(1)
    cells = np.flatnonzero((ma >= frac * ma.max()) | (mb >= frac * mb.max()))
    return [int((hb[c].argmax() - ha[c].argmax()) % o) for c in cells]
