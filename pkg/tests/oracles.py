"""Independent reference computations used by the tests.

Nothing here imports the package; each routine recomputes a quantity by a
different route than the library (determinants instead of QR, eigen-
decompositions instead of push-forwards, closed-form sums instead of
orbit products).
"""

import itertools
import math

import numpy as np


def gram_volume(X):
    """Euclidean k-volume of the columns of X as sqrt(det(X^T X))."""
    X = np.asarray(X, dtype=float)
    return math.sqrt(max(np.linalg.det(X.T @ X), 0.0))


def minors_compound(A, k):
    """k-th compound matrix built minor by minor with np.linalg.det."""
    A = np.asarray(A, dtype=float)
    rows = list(itertools.combinations(range(A.shape[0]), k))
    cols = list(itertools.combinations(range(A.shape[1]), k))
    out = np.empty((len(rows), len(cols)))
    for i, r in enumerate(rows):
        for j, c in enumerate(cols):
            out[i, j] = np.linalg.det(A[np.ix_(r, c)])
    return out


def dk_by_compound(A, k):
    """Largest singular value of the k-th compound (Euclidean D_k)."""
    C = minors_compound(A, k)
    return float(np.sqrt(np.max(np.linalg.eigvalsh(C.T @ C))))


def sv_product(A, k):
    s = np.linalg.svd(np.asarray(A, dtype=float), compute_uv=False)
    return float(np.prod(s[:k]))


def linf_operator_norm(A):
    """Max absolute row sum, from enumerating the sign vertices of the unit cube."""
    A = np.asarray(A, dtype=float)
    best = 0.0
    for signs in itertools.product((-1.0, 1.0), repeat=A.shape[1]):
        best = max(best, float(np.abs(A @ np.array(signs)).max()))
    return best


def linf_dist_scan(x, b, lo=-5.0, hi=5.0, num=200001):
    """min over t of ||x - t b||_inf on a dense grid."""
    t = np.linspace(lo, hi, num)
    return float(np.min(np.max(np.abs(np.asarray(x)[None, :] - t[:, None] * np.asarray(b)[None, :]),
                               axis=1)))


def sphere_sup_projection(P, samples=20000):
    """Sup of ||P x||_2 over unit x in R^2 by dense sampling of the circle."""
    a = np.linspace(0.0, 2.0 * math.pi, samples, endpoint=False)
    X = np.vstack([np.cos(a), np.sin(a)])
    return float(np.max(np.linalg.norm(P @ X, axis=0)))


def line_hausdorff(theta):
    """Hausdorff distance between the unit spheres of two lines at angle theta in R^2."""
    a = np.array([1.0, 0.0])
    b = np.array([math.cos(theta), math.sin(theta)])
    # unit spheres of lines are two points each
    d_ab = max(min(np.linalg.norm(x - y) for y in (b, -b)) for x in (a, -a))
    d_ba = max(min(np.linalg.norm(x - y) for y in (a, -a)) for x in (b, -b))
    return max(d_ab, d_ba)


def eigen_directions(A):
    """Unit eigenvectors of a real diagonalizable matrix, sorted by decreasing |eigenvalue|."""
    w, V = np.linalg.eig(np.asarray(A, dtype=float))
    order = np.argsort(-np.abs(w))
    V = np.real(V[:, order])
    return np.abs(w[order]), V / np.linalg.norm(V, axis=0)


def sin_angle(u, v):
    u = np.asarray(u, float) / np.linalg.norm(u)
    v = np.asarray(v, float) / np.linalg.norm(v)
    return math.sqrt(max(0.0, 1.0 - float(u @ v) ** 2))


def saddle_constants(upsilon, N=40, a=0.5, b=2.0, coupling=1.0):
    """h1, h2, H1, R for phi(x, y) = (a x, b y + c x^2) on the stable side.

    S = span(e1), U = span(e2), both orthogonal, so projection norms are 1,
    restricted products are powers of a and inverse U-products powers of
    1/b. h(x) = x and rho = 1, hence h^{-1} is the identity and rho~ = 1.
    """
    f = abs(coupling)
    h1 = max(math.exp(n * upsilon) * a ** n for n in range(N + 1))
    h2 = 0.0
    for n in range(N + 1):
        acc = sum(math.exp(-2 * j * upsilon) * f * a ** (n - 1 - j) for j in range(n))
        acc += sum(math.exp(-2 * j * upsilon) * f * b ** (-(j + 1 - n)) for j in range(n, N + 1))
        h2 = max(h2, math.exp(n * upsilon) * acc)
    rho_tilde = 1.0
    H1 = rho_tilde if h2 == 0 else min(0.5 / (2.0 * h2), rho_tilde)
    return {"h1": h1, "h2": h2, "H1": H1, "R": H1 / (2.0 * h1)}


def saddle_stable_coefficient(a=0.5, b=2.0, coupling=1.0):
    """c with y = c x^2 invariant under (x, y) -> (a x, b y + coupling x^2).

    Invariance of the graph: c (a x)^2 = b c x^2 + coupling x^2.
    """
    return coupling / (a * a - b)


def two_point_log_mean(values):
    """Mean and standard deviation of log of an equiprobable finite law."""
    logs = np.log(np.asarray(values, dtype=float))
    return float(logs.mean()), float(logs.std())


def delay_exponents(a, b, tau):
    """log |roots| of z^{tau+1} - a z^tau - b, sorted decreasing."""
    coeffs = np.zeros(tau + 2)
    coeffs[0], coeffs[1], coeffs[-1] = 1.0, -a, -b
    return sorted(np.log(np.abs(np.roots(coeffs))).tolist(), reverse=True)
