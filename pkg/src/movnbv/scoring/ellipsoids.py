"""Ellipsoid summaries of voxel sets: GMM clustering and minimum-volume enclosing ellipsoids."""

from dataclasses import dataclass, field
import math
from pathlib import Path

import numba
import numpy as np
from scipy.spatial import ConvexHull, QhullError
from sklearn.mixture import GaussianMixture

JITTER = 1e-4  # metres; radius given to directions a degenerate point set does not span


@dataclass(frozen=True)
class Ellipsoid:
    """Points x with (x - center)^T shape (x - center) <= 1."""

    center: np.ndarray
    shape: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.center, dtype=float).reshape(3)
        A = np.asarray(self.shape, dtype=float).reshape(3, 3)
        A = 0.5 * (A + A.T)
        if np.linalg.eigvalsh(A).min() <= 0:
            raise ValueError("ellipsoid shape matrix must be positive definite")
        object.__setattr__(self, "center", c)
        object.__setattr__(self, "shape", A)

    def mahalanobis_sq(self, points):
        d = np.asarray(points, float).reshape(-1, 3) - self.center
        return np.einsum("ni,ij,nj->n", d, self.shape, d)

    def volume(self):
        return 4.0 / 3.0 * math.pi / math.sqrt(np.linalg.det(self.shape))


@dataclass(frozen=True)
class EllipsoidSummary:
    frontier: list = field(default_factory=list)
    occupied: list = field(default_factory=list)

    def dump(self, path):
        """One ``set m_x m_y m_z a11 a12 a13 a22 a23 a33`` line per ellipsoid."""
        lines = []
        for name, group in (("frontier", self.frontier), ("occupied", self.occupied)):
            for e in group:
                A = e.shape
                vals = list(e.center) + [A[0, 0], A[0, 1], A[0, 2], A[1, 1], A[1, 2], A[2, 2]]
                lines.append(name + " " + " ".join(f"{v:.9g}" for v in vals))
        Path(path).write_text("\n".join(lines) + ("\n" if lines else ""))


def _hull_vertices(Z):
    n, r = Z.shape
    if r == 1:
        return Z[[np.argmin(Z[:, 0]), np.argmax(Z[:, 0])]]
    if n <= r + 1:
        return Z
    try:
        return Z[ConvexHull(Z).vertices]
    except QhullError:
        return Z


@numba.njit(cache=True)
def _barycentric_weights(Q, tol, max_iter):
    # Khachiyan coordinate ascent with Todd-Yildirim away steps: besides
    # moving weight toward the point of largest leverage, weight is taken
    # from the supported point of smallest leverage when that is the larger
    # violation. Converges linearly instead of O(1/tol).
    d, n = Q.shape
    u = np.full(n, 1.0 / n)
    M = np.empty(n)
    for _ in range(max_iter):
        X = (Q * u) @ Q.T
        Xi = np.linalg.inv(X)
        for i in range(n):
            q = Q[:, i]
            M[i] = q @ Xi @ q
        j = np.argmax(M)
        up = M[j] / d - 1.0
        if up <= tol:
            break
        k = -1
        for i in range(n):
            if u[i] > 0.0 and (k < 0 or M[i] < M[k]):
                k = i
        down = 1.0 - M[k] / d
        if up >= down:
            beta = (M[j] - d) / (d * (M[j] - 1.0))
            u *= 1.0 - beta
            u[j] += beta
        else:
            beta = (d - M[k]) / (d * (M[k] - 1.0))
            cap = u[k] / (1.0 - u[k])
            if beta >= cap:
                beta = cap
            u *= 1.0 + beta
            u[k] -= beta
            if beta == cap:
                u[k] = 0.0
    return u


def _khachiyan(Z, tol, max_iter=100_000):
    """Minimum-volume ellipsoid of points spanning R^r via barycentric ascent.

    Stops when the largest lifted leverage is within ``tol`` of its optimum
    r + 1. Returns the centre and shape matrix, rescaled so the farthest
    point sits exactly on the boundary.
    """
    n, r = Z.shape
    Q = np.ascontiguousarray(np.vstack([Z.T, np.ones(n)]))
    u = _barycentric_weights(Q, tol, max_iter)
    c = Z.T @ u
    S = (Z.T * u) @ Z - np.outer(c, c)
    A = np.linalg.inv(S) / r
    d = Z - c
    worst = np.einsum("ni,ij,nj->n", d, A, d).max()
    return c, A / worst


def mvee(points, tol=1e-4, jitter=JITTER):
    """Minimum-volume ellipsoid enclosing ``points``.

    The fit runs in the affine hull of the points; directions the set does
    not span get radius ``jitter``, so a single point yields a tiny ball.
    """
    X = np.asarray(points, dtype=float).reshape(-1, 3)
    if len(X) == 0:
        raise ValueError("mvee needs at least one point")
    c0 = X.mean(axis=0)
    Y = X - c0
    _, s, Vt = np.linalg.svd(Y, full_matrices=True)
    scale = max(1.0, float(s[0]) if len(s) else 0.0)
    r = int(np.sum(s > 1e-9 * scale))
    V = Vt[:r].T  # (3, r)
    if r == 0:
        return Ellipsoid(c0, np.eye(3) / jitter**2)
    Z = Y @ V
    c, A_r = _khachiyan(_hull_vertices(Z), tol)
    # inverse shape in 3-D: fitted spread in-span plus jitter^2 elsewhere
    S3 = V @ np.linalg.inv(A_r) @ V.T + jitter**2 * (np.eye(3) - V @ V.T)
    A = np.linalg.inv(S3)
    return Ellipsoid(c0 + V @ c, 0.5 * (A + A.T))


def cluster(points, k, rng, max_iters=100, tol=1e-3):
    """Split points into up to ``k`` groups by maximum GMM responsibility.

    Full-covariance EM seeded with k-means++; empty components are dropped
    and ``k`` is capped at the number of points.
    """
    X = np.asarray(points, dtype=float).reshape(-1, 3)
    if len(X) == 0:
        raise ValueError("cannot cluster an empty point set")
    if k < 1:
        raise ValueError("k must be >= 1")
    k = min(k, len(X))
    if k == 1:
        return [X]
    gmm = GaussianMixture(
        n_components=k,
        covariance_type="full",
        reg_covar=1e-6,
        init_params="k-means++",
        max_iter=max_iters,
        tol=tol,
        random_state=int(rng.integers(2**31 - 1)),
    )
    labels = gmm.fit(X).predict(X)
    return [X[labels == c] for c in range(k) if np.any(labels == c)]


def cluster_count(n, per_cluster=150, k_max=6):
    return int(min(max(math.ceil(n / per_cluster), 1), k_max))


def summarize_points(points, rng, max_points=2000, per_cluster=150, k_max=6, mvee_tol=1e-4):
    points = np.asarray(points, dtype=float).reshape(-1, 3)
    if len(points) == 0:
        return []
    if len(points) > max_points:
        keep = np.sort(rng.choice(len(points), size=max_points, replace=False))
        points = points[keep]
    groups = cluster(points, cluster_count(len(points), per_cluster, k_max), rng)
    return [mvee(g, mvee_tol) for g in groups]


def summarize(frontier_points, occupied_points, rng, **kw):
    """Ellipsoid collections for the Frontier and Occupied voxel centres."""
    return EllipsoidSummary(
        frontier=summarize_points(frontier_points, rng, **kw),
        occupied=summarize_points(occupied_points, rng, **kw),
    )
