"""Triangle-mesh representation and per-face/per-instance geometry.

All coordinates are millimeters.  A mesh is immutable after construction:
every operation here is a pure function, safe to call concurrently.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import sparse

DEGENERATE_AREA_MM2 = 1e-12

# FDI two-digit codes: quadrant 1..4, position 1..8.
VALID_FDI = frozenset(q * 10 + p for q in (1, 2, 3, 4) for p in range(1, 9))


class MeshError(ValueError):
    """Raised for malformed meshes or label arrays."""


@dataclass(frozen=True)
class TriMesh:
    """Indexed triangle mesh.

    Parameters
    ----------
    vertices : (n, 3) float array, mm.
    faces : (m, 3) int array of vertex indices.
    vertex_normals : optional (n, 3) float array of unit normals.
    n_degenerate_dropped : faces removed at load time for having area
        below ``DEGENERATE_AREA_MM2``.
    """

    vertices: np.ndarray
    faces: np.ndarray
    vertex_normals: np.ndarray | None = None
    n_degenerate_dropped: int = 0

    def __post_init__(self):
        v = np.ascontiguousarray(np.asarray(self.vertices, dtype=np.float64))
        f = np.ascontiguousarray(np.asarray(self.faces, dtype=np.int64))
        if v.ndim != 2 or v.shape[1] != 3:
            raise MeshError(f"vertices must be (n, 3), got {v.shape}")
        if f.ndim != 2 or f.shape[1] != 3:
            raise MeshError(f"faces must be (m, 3), got {f.shape}")
        if f.shape[0] == 0:
            raise MeshError("mesh has no faces")
        if f.min() < 0 or f.max() >= v.shape[0]:
            raise MeshError("face index out of range")
        if (
            np.any(f[:, 0] == f[:, 1])
            or np.any(f[:, 1] == f[:, 2])
            or np.any(f[:, 0] == f[:, 2])
        ):
            raise MeshError("face repeats a vertex index")
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "faces", f)
        if self.vertex_normals is not None:
            n = np.ascontiguousarray(np.asarray(self.vertex_normals, dtype=np.float64))
            if n.shape != v.shape:
                raise MeshError("vertex_normals shape mismatch")
            object.__setattr__(self, "vertex_normals", n)

    @property
    def n_vertices(self) -> int:
        return self.vertices.shape[0]

    @property
    def n_faces(self) -> int:
        return self.faces.shape[0]

    @staticmethod
    def from_arrays(vertices, faces, vertex_normals=None) -> "TriMesh":
        """Build a mesh, dropping degenerate faces (counted, not kept)."""
        v = np.asarray(vertices, dtype=np.float64)
        f = np.asarray(faces, dtype=np.int64)
        if f.ndim != 2 or f.shape[1] != 3:
            raise MeshError(f"faces must be (m, 3), got {f.shape}")
        if f.shape[0] and (f.min() < 0 or f.max() >= v.shape[0]):
            raise MeshError("face index out of range")
        repeated = (f[:, 0] == f[:, 1]) | (f[:, 1] == f[:, 2]) | (f[:, 0] == f[:, 2])
        areas = _raw_face_areas(v, f)
        keep = (~repeated) & (areas > DEGENERATE_AREA_MM2)
        dropped = int(np.count_nonzero(~keep))
        return TriMesh(
            vertices=v,
            faces=f[keep],
            vertex_normals=vertex_normals,
            n_degenerate_dropped=dropped,
        )


def _raw_face_areas(v: np.ndarray, f: np.ndarray) -> np.ndarray:
    if f.shape[0] == 0:
        return np.zeros(0)
    e1 = v[f[:, 1]] - v[f[:, 0]]
    e2 = v[f[:, 2]] - v[f[:, 0]]
    return 0.5 * np.linalg.norm(np.cross(e1, e2), axis=1)


@dataclass
class FaceLabeling:
    """Per-face non-negative integer labels; 0 = background/unassigned."""

    labels: np.ndarray

    def __post_init__(self):
        lab = np.ascontiguousarray(np.asarray(self.labels, dtype=np.int64))
        if lab.ndim != 1:
            raise MeshError("labels must be 1-D")
        if lab.size and lab.min() < 0:
            raise MeshError("labels must be non-negative")
        self.labels = lab

    def __len__(self) -> int:
        return self.labels.size

    def ids(self) -> np.ndarray:
        """Sorted nonzero instance ids present."""
        u = np.unique(self.labels)
        return u[u > 0]

    def check_against(self, mesh: TriMesh) -> None:
        if len(self) != mesh.n_faces:
            raise MeshError(
                f"labeling length {len(self)} != face count {mesh.n_faces}"
            )


@dataclass
class VertexLabeling:
    """Per-vertex FDI codes (or 0 for background)."""

    labels: np.ndarray

    def __post_init__(self):
        lab = np.ascontiguousarray(np.asarray(self.labels, dtype=np.int64))
        if lab.ndim != 1:
            raise MeshError("labels must be 1-D")
        nz = lab[lab != 0]
        bad = set(np.unique(nz).tolist()) - VALID_FDI
        if bad:
            raise MeshError(f"invalid FDI codes: {sorted(bad)}")
        self.labels = lab

    def __len__(self) -> int:
        return self.labels.size

    def check_against(self, mesh: TriMesh) -> None:
        if len(self) != mesh.n_vertices:
            raise MeshError(
                f"labeling length {len(self)} != vertex count {mesh.n_vertices}"
            )


@dataclass(frozen=True)
class ObbExtents:
    """Oriented bounding box: extents sorted descending, orthonormal axes."""

    extents: np.ndarray  # (3,) mm, descending
    axes: np.ndarray  # (3, 3), rows are unit vectors
    degenerate: bool = False

    def __post_init__(self):
        e = np.asarray(self.extents, dtype=np.float64)
        a = np.asarray(self.axes, dtype=np.float64)
        if e.shape != (3,) or a.shape != (3, 3):
            raise MeshError("ObbExtents needs 3 extents and 3 axes")
        if not (e[0] >= e[1] >= e[2] > 0):
            raise MeshError(f"extents not sorted-positive: {e}")
        g = a @ a.T - np.eye(3)
        if np.max(np.abs(g)) > 1e-8:
            raise MeshError("axes not orthonormal")
        object.__setattr__(self, "extents", e)
        object.__setattr__(self, "axes", a)

    @property
    def volume(self) -> float:
        return float(self.extents[0] * self.extents[1] * self.extents[2])


# ---------------------------------------------------------------------------
# per-face quantities


def face_geometry(mesh: TriMesh) -> tuple[np.ndarray, np.ndarray]:
    """Per-face centroids (m, 3) and areas (m,).

    Centroid is the mean of the three corner vertices; area is half the
    cross-product magnitude.
    """
    v, f = mesh.vertices, mesh.faces
    centroids = (v[f[:, 0]] + v[f[:, 1]] + v[f[:, 2]]) / 3.0
    return centroids, _raw_face_areas(v, f)


def face_normals(mesh: TriMesh, normalized: bool = True) -> np.ndarray:
    """Per-face normals from the winding order."""
    v, f = mesh.vertices, mesh.faces
    n = np.cross(v[f[:, 1]] - v[f[:, 0]], v[f[:, 2]] - v[f[:, 0]])
    if normalized:
        norms = np.linalg.norm(n, axis=1, keepdims=True)
        norms[norms == 0] = 1.0
        n = n / norms
    return n


def surface_centroid(mesh: TriMesh) -> np.ndarray:
    """Area-weighted centroid of the whole surface."""
    c, a = face_geometry(mesh)
    return (c * a[:, None]).sum(axis=0) / a.sum()


def instance_centroid(mesh: TriMesh, labeling: FaceLabeling, instance_id: int) -> np.ndarray:
    """Area-weighted mean of the face centroids carrying ``instance_id``."""
    labeling.check_against(mesh)
    sel = labeling.labels == instance_id
    if not np.any(sel):
        raise MeshError(f"instance id {instance_id} absent from labeling")
    c, a = face_geometry(mesh)
    w = a[sel]
    return (c[sel] * w[:, None]).sum(axis=0) / w.sum()


def instance_obb(mesh: TriMesh, labeling: FaceLabeling, instance_id: int) -> ObbExtents:
    """PCA box of an instance.

    Axes are the principal axes of the area-weighted covariance of the
    instance's face centroids; each extent is the max-min spread of the
    instance's corner vertices projected on that axis.  Degenerate
    (collinear/coincident) instances are flagged and floored at 0.1 mm.
    """
    labeling.check_against(mesh)
    sel = labeling.labels == instance_id
    if not np.any(sel):
        raise MeshError(f"instance id {instance_id} absent from labeling")
    c, a = face_geometry(mesh)
    pts = c[sel]
    w = a[sel]
    mean = (pts * w[:, None]).sum(axis=0) / w.sum()
    d = pts - mean
    cov = (d * w[:, None]).T @ d / w.sum()
    evals, evecs = np.linalg.eigh(cov)  # ascending
    axes = evecs.T[::-1].copy()  # rows, descending variance
    # canonical sign: largest-|component| entry is positive
    for i in range(3):
        j = int(np.argmax(np.abs(axes[i])))
        if axes[i, j] < 0:
            axes[i] = -axes[i]
    verts = mesh.vertices[np.unique(mesh.faces[sel])]
    proj = (verts - mean) @ axes.T
    ext = proj.max(axis=0) - proj.min(axis=0)
    degenerate = bool(evals[1] <= 1e-12 or np.any(ext < 0.1))
    ext = np.maximum(ext, 0.1)
    order = np.argsort(-ext, kind="stable")
    return ObbExtents(extents=ext[order], axes=axes[order], degenerate=degenerate)


# ---------------------------------------------------------------------------
# curvature


def vertex_curvature(mesh: TriMesh, raw: bool = False) -> np.ndarray:
    """Discrete mean-curvature magnitude per vertex, normalized to [0, 1].

    The raw value is the norm of the cotangent-Laplacian applied to the
    vertex positions, divided by twice the barycentric (one-third
    incident-face) vertex area; on a sphere of radius r this approaches
    1/r.  For display the raw values are clamped to their [5th, 95th]
    percentile range and mapped affinely to [0, 1].  Isolated vertices
    get 0.  Pass ``raw=True`` to skip normalization.
    """
    v, f = mesh.vertices, mesh.faces
    nv = v.shape[0]

    ii, jj, kk = f[:, 0], f[:, 1], f[:, 2]
    e0 = v[kk] - v[jj]  # edge opposite vertex 0
    e1 = v[ii] - v[kk]
    e2 = v[jj] - v[ii]

    def cot_at(a, b):
        # cotangent of angle between -a and b, at shared corner
        cross = np.cross(-a, b)
        denom = np.linalg.norm(cross, axis=1)
        denom[denom < 1e-300] = 1e-300
        return np.einsum("ij,ij->i", -a, b) / denom

    cot0 = cot_at(e1, e2)  # angle at vertex 0, opposite edge e0
    cot1 = cot_at(e2, e0)
    cot2 = cot_at(e0, e1)

    rows = np.concatenate([jj, kk, kk, ii, ii, jj])
    cols = np.concatenate([kk, jj, ii, kk, jj, ii])
    vals = 0.5 * np.concatenate([cot0, cot0, cot1, cot1, cot2, cot2])
    w = sparse.csr_matrix((vals, (rows, cols)), shape=(nv, nv))
    wsum = np.asarray(w.sum(axis=1)).ravel()
    lap = w @ v - wsum[:, None] * v  # sum_j w_ij (x_j - x_i)

    areas = _raw_face_areas(v, f)
    a_vert = np.zeros(nv)
    for c in range(3):
        np.add.at(a_vert, f[:, c], areas / 3.0)

    raw_curv = np.zeros(nv)
    ok = a_vert > 1e-300
    raw_curv[ok] = np.linalg.norm(lap[ok], axis=1) / (2.0 * a_vert[ok])
    if raw:
        return raw_curv

    lo, hi = np.percentile(raw_curv, [5.0, 95.0])
    if hi - lo < 1e-300:
        # nearly-constant bulk: fall back to the full range
        lo, hi = raw_curv.min(), raw_curv.max()
        if hi - lo < 1e-300:
            return np.zeros(nv)
    out = np.clip(raw_curv, lo, hi)
    return (out - lo) / (hi - lo)


# ---------------------------------------------------------------------------
# FDI label bridging (per-vertex ground truth <-> per-face)


def fdi_vertex_to_face(mesh: TriMesh, vl: VertexLabeling) -> FaceLabeling:
    """Face label = majority of its three vertex labels; ties -> 0."""
    vl.check_against(mesh)
    tri = vl.labels[mesh.faces]  # (m, 3)
    out = np.zeros(mesh.n_faces, dtype=np.int64)
    eq01 = tri[:, 0] == tri[:, 1]
    eq12 = tri[:, 1] == tri[:, 2]
    eq02 = tri[:, 0] == tri[:, 2]
    out[eq01 | eq02] = tri[eq01 | eq02, 0]
    only12 = eq12 & ~(eq01 | eq02)
    out[only12] = tri[only12, 1]
    return FaceLabeling(out)


def fdi_face_to_vertex(mesh: TriMesh, fl: FaceLabeling) -> VertexLabeling:
    """Vertex label = area-weighted majority over incident faces.

    Exact ties resolve to the smaller label (0 = background wins a tie
    against any code).
    """
    fl.check_against(mesh)
    _, areas = face_geometry(mesh)
    labels = np.unique(fl.labels)
    votes = np.zeros((mesh.n_vertices, labels.size))
    lab_idx = np.searchsorted(labels, fl.labels)
    for c in range(3):
        np.add.at(votes, (mesh.faces[:, c], lab_idx), areas)
    # argmax returns the first (smallest-label) max, giving the tie rule
    best = np.argmax(votes, axis=1)
    out = labels[best]
    out[votes.sum(axis=1) == 0] = 0  # isolated vertices
    return VertexLabeling(out)
