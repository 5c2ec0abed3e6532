"""Ellipsoid silhouettes in a pinhole image and the signed depth-weighted area score."""

from dataclasses import dataclass
import math

import numba
import numpy as np

from ..geometry import invert


@dataclass(frozen=True)
class SilhouetteRegion:
    pixel_area: float
    mean_depth: float
    valid: bool


def _to_camera(shapes, centers, rel_poses):
    """Ellipsoid (A, m) in the optical frames of cameras at object-frame poses ``rel_poses``.

    shapes (E, 3, 3), centers (E, 3), rel_poses (P, 4, 4) -> (P, E, 3, 3), (P, E, 3).
    """
    T = invert(rel_poses)
    R, t = T[:, :3, :3], T[:, :3, 3]
    m = np.einsum("pij,ej->pei", R, centers) + t[:, None, :]
    A = np.einsum("pij,ejk,plk->peil", R, shapes, R)
    return A, m


def _full_image_area(camera):
    return float(camera.width * camera.height)


def project(ellipsoid, rel_pose, camera, stride=2):
    """Silhouette of one ellipsoid seen from a camera at object-frame pose ``rel_pose``.

    Reference rasteriser: every sampled pixel ray is tested against the
    ellipsoid. Only in-image pixels count.
    """
    A, m = _to_camera(ellipsoid.shape[None], ellipsoid.center[None], np.asarray(rel_pose, float)[None])
    A, m = A[0, 0], m[0, 0]
    full = _full_image_area(camera)
    mAm = m @ A @ m
    if mAm < 1.0:
        # camera inside the ellipsoid: it hides the whole view
        return SilhouetteRegion(full, max(m[2], camera.depth_min), True)
    S = np.linalg.inv(A)
    if m[2] + math.sqrt(S[2, 2]) <= camera.depth_min:
        return SilhouetteRegion(0.0, 0.0, False)
    dirs, _ = camera.rays(stride)
    Am = A @ m
    dAm = dirs @ Am
    dAd = np.einsum("ni,ij,nj->n", dirs, A, dirs)
    hits = (dAm > 0) & (dAm**2 - (mAm - 1.0) * dAd >= 0)
    area = min(float(hits.sum()) * stride**2, full)
    if area == 0:
        return SilhouetteRegion(0.0, 0.0, False)
    return SilhouetteRegion(area, max(m[2], camera.depth_min), True)


@numba.njit(cache=True)
def _tangent_range(c11, c13, c33):
    # roots of c33 u^2 - 2 c13 u + c11 = 0 (tangent lines u = const)
    disc = c13 * c13 - c11 * c33
    if disc < 0.0:
        disc = 0.0
    r = math.sqrt(disc)
    a = (c13 - r) / c33
    b = (c13 + r) / c33
    return min(a, b), max(a, b)


@numba.njit(cache=True)
def _silhouette_kernel(A, m, S, K, Kinv, width, height, stride, depth_min, area, depth, valid):
    n = A.shape[0]
    off = (stride - 1) / 2.0
    nu = (width + stride - 1) // stride
    nv = (height + stride - 1) // stride
    full = float(width * height)
    for b in range(n):
        a = A[b]
        c = m[b]
        Am0 = a[0, 0] * c[0] + a[0, 1] * c[1] + a[0, 2] * c[2]
        Am1 = a[1, 0] * c[0] + a[1, 1] * c[1] + a[1, 2] * c[2]
        Am2 = a[2, 0] * c[0] + a[2, 1] * c[1] + a[2, 2] * c[2]
        mAm = c[0] * Am0 + c[1] * Am1 + c[2] * Am2
        ez = math.sqrt(S[b, 2, 2])
        if mAm < 1.0:
            area[b] = full
            depth[b] = max(c[2], depth_min)
            valid[b] = True
            continue
        if c[2] + ez <= depth_min:
            area[b] = 0.0
            depth[b] = 0.0
            valid[b] = False
            continue
        i0, i1, j0, j1 = 0, nu - 1, 0, nv - 1
        if c[2] - ez > 1e-9:
            # whole ellipsoid in front of the camera plane: bound the
            # silhouette by the tangent lines of its image conic
            D = S[b].copy()
            for r in range(3):
                for s in range(3):
                    D[r, s] -= c[r] * c[s]
            C = K @ D @ K.T
            u_lo, u_hi = _tangent_range(C[0, 0], C[0, 2], C[2, 2])
            v_lo, v_hi = _tangent_range(C[1, 1], C[1, 2], C[2, 2])
            i0 = max(i0, int(math.floor((u_lo - off) / stride)) - 1)
            i1 = min(i1, int(math.ceil((u_hi - off) / stride)) + 1)
            j0 = max(j0, int(math.floor((v_lo - off) / stride)) - 1)
            j1 = min(j1, int(math.ceil((v_hi - off) / stride)) + 1)
        q = mAm - 1.0
        count = 0
        for j in range(j0, j1 + 1):
            v = off + stride * j
            for i in range(i0, i1 + 1):
                u = off + stride * i
                d0 = Kinv[0, 0] * u + Kinv[0, 1] * v + Kinv[0, 2]
                d1 = Kinv[1, 0] * u + Kinv[1, 1] * v + Kinv[1, 2]
                d2 = Kinv[2, 0] * u + Kinv[2, 1] * v + Kinv[2, 2]
                dAm = d0 * Am0 + d1 * Am1 + d2 * Am2
                if dAm <= 0.0:
                    continue
                dAd = (a[0, 0] * d0 * d0 + a[1, 1] * d1 * d1 + a[2, 2] * d2 * d2
                       + 2.0 * (a[0, 1] * d0 * d1 + a[0, 2] * d0 * d2 + a[1, 2] * d1 * d2))
                if dAm * dAm - q * dAd >= 0.0:
                    count += 1
        area[b] = min(count * stride * stride, full)
        valid[b] = count > 0
        depth[b] = max(c[2], depth_min) if count > 0 else 0.0


def silhouettes(shapes, centers, camera, stride=2):
    """Areas, depths and validity for camera-frame ellipsoids (batched, compiled)."""
    shapes = np.ascontiguousarray(np.asarray(shapes, float).reshape(-1, 3, 3))
    centers = np.ascontiguousarray(np.asarray(centers, float).reshape(-1, 3))
    n = len(shapes)
    area = np.zeros(n)
    depth = np.zeros(n)
    valid = np.zeros(n, dtype=np.bool_)
    if n == 0:
        return area, depth, valid
    S = np.linalg.inv(shapes)
    K = np.ascontiguousarray(camera.K)
    _silhouette_kernel(shapes, centers, S, K, np.linalg.inv(K), int(camera.width), int(camera.height),
                       int(stride), float(camera.depth_min), area, depth, valid)
    return area, depth, valid


def depth_ranks(depth, valid):
    """Zero-based rank by increasing depth among valid entries (last axis); -1 when invalid.

    Stable, so equal depths keep their input order.
    """
    key = np.where(valid, depth, np.inf)
    order = np.argsort(key, axis=-1, kind="stable")
    ranks = np.empty_like(order)
    np.put_along_axis(ranks, order, np.broadcast_to(np.arange(key.shape[-1]), key.shape), axis=-1)
    return np.where(valid, ranks, -1)


def depth_weights(regions, alpha=0.5):
    """alpha^(rank-1) by increasing mean depth; invalid regions weigh 0."""
    if not 0.0 < alpha <= 1.0:
        raise ValueError("alpha must lie in (0, 1]")
    if len(regions) == 0:
        return np.zeros(0)
    depth = np.array([r.mean_depth for r in regions], dtype=float)
    valid = np.array([r.valid for r in regions], dtype=bool)
    ranks = depth_ranks(depth, valid)
    return np.where(valid, alpha ** np.maximum(ranks, 0), 0.0)


def _stack(summary):
    ells = list(summary.frontier) + list(summary.occupied)
    sign = np.array([1.0] * len(summary.frontier) + [-1.0] * len(summary.occupied))
    if not ells:
        return np.zeros((0, 3, 3)), np.zeros((0, 3)), sign
    return np.stack([e.shape for e in ells]), np.stack([e.center for e in ells]), sign


def score_poses(rel_poses, summary, camera, alpha=0.5, stride=2):
    """Signed coverage score for each object-frame camera pose in ``rel_poses`` (P, 4, 4).

    Frontier and Occupied silhouettes are ranked jointly by centre depth.
    """
    if not 0.0 < alpha <= 1.0:
        raise ValueError("alpha must lie in (0, 1]")
    rel_poses = np.asarray(rel_poses, float).reshape(-1, 4, 4)
    shapes, centers, sign = _stack(summary)
    P, E = len(rel_poses), len(sign)
    if E == 0:
        return np.zeros(P)
    A, m = _to_camera(shapes, centers, rel_poses)
    area, depth, valid = silhouettes(A.reshape(-1, 3, 3), m.reshape(-1, 3), camera, stride)
    area, depth, valid = area.reshape(P, E), depth.reshape(P, E), valid.reshape(P, E)
    ranks = depth_ranks(depth, valid)
    w = np.where(valid, alpha ** np.maximum(ranks, 0), 0.0)
    return (w * area * sign).sum(axis=1)


def score(rel_pose, summary, camera, alpha=0.5, stride=2):
    """Weighted Frontier silhouette area minus weighted Occupied silhouette area."""
    return float(score_poses(np.asarray(rel_pose, float)[None], summary, camera, alpha, stride)[0])
