"""Triangle meshes: the default test object, OFF/STL readers, PLY writer."""

from dataclasses import dataclass
from pathlib import Path
import struct

import numpy as np


class MeshLoadError(ValueError):
    pass


@dataclass(frozen=True)
class TriangleMesh:
    vertices: np.ndarray   # (n, 3) metres, object body frame
    triangles: np.ndarray  # (m, 3) vertex indices

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=float).reshape(-1, 3)
        t = np.asarray(self.triangles, dtype=np.int64).reshape(-1, 3)
        if len(v) == 0 or len(t) == 0:
            raise ValueError("mesh must have at least one triangle")
        if t.min() < 0 or t.max() >= len(v):
            raise ValueError("triangle index out of range")
        if not np.all(np.isfinite(v)):
            raise ValueError("mesh vertices must be finite")
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "triangles", t)

    @property
    def corners(self):
        """(m, 3, 3) array of triangle corner coordinates."""
        return self.vertices[self.triangles]

    def bounds(self):
        return self.vertices.min(axis=0), self.vertices.max(axis=0)


_BOX_FACES = np.array([
    [0, 2, 1], [0, 3, 2],  # bottom
    [4, 5, 6], [4, 6, 7],  # top
    [0, 1, 5], [0, 5, 4],
    [1, 2, 6], [1, 6, 5],
    [2, 3, 7], [2, 7, 6],
    [3, 0, 4], [3, 4, 7],
])


def box_mesh(lo, hi):
    (x0, y0, z0), (x1, y1, z1) = lo, hi
    v = np.array([
        [x0, y0, z0], [x1, y0, z0], [x1, y1, z0], [x0, y1, z0],
        [x0, y0, z1], [x1, y0, z1], [x1, y1, z1], [x0, y1, z1],
    ], dtype=float)
    return v, _BOX_FACES.copy()


def merge(parts):
    verts, tris, offset = [], [], 0
    for v, t in parts:
        verts.append(v)
        tris.append(t + offset)
        offset += len(v)
    return TriangleMesh(np.vstack(verts), np.vstack(tris))


def default_object_mesh():
    """Asymmetric multi-box object about 0.6 m long, resting on the ground.

    A long body, a tall block near the front-left and a low block sticking
    out to the back-right, so opposite sides expose different surfaces.
    Coordinates avoid multiples of common voxel sizes.
    """
    return merge([
        box_mesh((-0.31, -0.13, 0.11), (0.29, 0.12, 0.41)),
        box_mesh((0.07, 0.02, 0.41), (0.23, 0.13, 0.71)),
        box_mesh((-0.29, -0.31, 0.11), (-0.09, -0.13, 0.29)),
    ])


# -- readers ----------------------------------------------------------------

def read_off(path):
    tokens = []
    for line in Path(path).read_text().splitlines():
        line = line.split("#", 1)[0].strip()
        if line:
            tokens.extend(line.split())
    if not tokens or tokens[0].upper() != "OFF":
        raise MeshLoadError(f"{path}: not an OFF file")
    pos = 1
    try:
        nv, nf = int(tokens[pos]), int(tokens[pos + 1])
        pos += 3
        verts = np.array(tokens[pos:pos + 3 * nv], dtype=float).reshape(nv, 3)
        pos += 3 * nv
        tris = []
        for _ in range(nf):
            k = int(tokens[pos])
            idx = [int(x) for x in tokens[pos + 1:pos + 1 + k]]
            pos += 1 + k
            # fan-triangulate polygons
            for i in range(1, k - 1):
                tris.append((idx[0], idx[i], idx[i + 1]))
    except (IndexError, ValueError) as exc:
        raise MeshLoadError(f"{path}: malformed OFF ({exc})") from exc
    return TriangleMesh(verts, np.array(tris))


def _dedupe(corners):
    flat = corners.reshape(-1, 3)
    verts, inverse = np.unique(flat, axis=0, return_inverse=True)
    return TriangleMesh(verts, inverse.reshape(-1, 3))


def read_stl(path):
    data = Path(path).read_bytes()
    if len(data) >= 84:
        (count,) = struct.unpack_from("<I", data, 80)
        if 84 + 50 * count == len(data):
            rec = np.dtype([("n", "<f4", 3), ("v", "<f4", (3, 3)), ("attr", "<u2")])
            arr = np.frombuffer(data, dtype=rec, count=count, offset=84)
            return _dedupe(arr["v"].astype(float))
    text = data.decode("ascii", errors="replace")
    if not text.lstrip().lower().startswith("solid"):
        raise MeshLoadError(f"{path}: not an STL file")
    corners = [
        [float(x) for x in line.split()[1:4]]
        for line in text.splitlines()
        if line.strip().lower().startswith("vertex")
    ]
    if not corners or len(corners) % 3:
        raise MeshLoadError(f"{path}: malformed ASCII STL")
    return _dedupe(np.array(corners).reshape(-1, 3, 3))


def load_mesh(path):
    path = Path(path)
    if not path.exists():
        raise MeshLoadError(f"mesh file not found: {path}")
    suffix = path.suffix.lower()
    if suffix == ".off":
        return read_off(path)
    if suffix == ".stl":
        return read_stl(path)
    raise MeshLoadError(f"unsupported mesh format: {suffix}")


def write_off(path, mesh):
    lines = ["OFF", f"{len(mesh.vertices)} {len(mesh.triangles)} 0"]
    lines += [f"{x:.9g} {y:.9g} {z:.9g}" for x, y, z in mesh.vertices]
    lines += [f"3 {a} {b} {c}" for a, b, c in mesh.triangles]
    Path(path).write_text("\n".join(lines) + "\n")


def write_ply(path, points):
    """ASCII PLY with a single vertex element of float x y z."""
    points = np.asarray(points, dtype=float).reshape(-1, 3)
    header = [
        "ply",
        "format ascii 1.0",
        f"element vertex {len(points)}",
        "property float x",
        "property float y",
        "property float z",
        "end_header",
    ]
    body = [f"{x:.6f} {y:.6f} {z:.6f}" for x, y, z in points]
    Path(path).write_text("\n".join(header + body) + "\n")


def read_ply(path):
    lines = Path(path).read_text().splitlines()
    n = 0
    for i, line in enumerate(lines):
        if line.startswith("element vertex"):
            n = int(line.split()[-1])
        if line.strip() == "end_header":
            body = lines[i + 1:i + 1 + n]
            if not body:
                return np.zeros((0, 3))
            return np.array([[float(x) for x in l.split()[:3]] for l in body])
    raise ValueError(f"{path}: missing PLY header")
