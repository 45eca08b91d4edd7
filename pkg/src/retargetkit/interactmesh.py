"""Interact-mesh construction: Delaunay tetrahedra over agent joints and
object vertices, with per-tetrahedron Laplacian coordinates.

The tetrahedralizer is an incremental Bowyer-Watson with a super-tetrahedron.
In-sphere tests run on cached circumcenters/radii in double precision; after
stripping the super vertices the result is self-checked (no input point
strictly inside any surviving circumsphere at 1e-9 relative, no super vertex
inside either) and rebuilt with a larger super-tetrahedron if the check fails.
Exact-arithmetic predicates are out of scope at this point-count scale.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import DataError, EmptyInteractMeshError

DUPLICATE_TOL = 1e-12
COPLANAR_TOL = 1e-9
INSPHERE_REL_TOL = 1e-9
DEGENERATE_VOLUME = 1e-9  # m^3

AGENT_A = "A"
AGENT_B = "B"
OBJECT = "obj"


def laplacian(tet_points: np.ndarray) -> np.ndarray:
    """4x3 Laplacian coordinates: row i = sum_{j != i} (p_i - p_j).

    Algebraically 4 p_i - sum_k p_k, but computed from pairwise differences:
    subtracting nearby points cancels any large common offset before the sum,
    which keeps translation invariance tight even for far-from-origin clouds.
    """
    p = np.asarray(tet_points, dtype=float)
    if p.shape != (4, 3):
        raise DataError(f"expected four 3D points, got shape {p.shape}")
    return (p[:, None, :] - p[None, :, :]).sum(axis=1)


def laplacians(tet_points: np.ndarray) -> np.ndarray:
    """Batched laplacian: (M, 4, 3) -> (M, 4, 3)."""
    p = np.asarray(tet_points, dtype=float)
    return (p[:, :, None, :] - p[:, None, :, :]).sum(axis=2)


def tet_volumes(points: np.ndarray, tets: np.ndarray) -> np.ndarray:
    """Signed volumes of index tetrahedra."""
    p = points[tets]
    a, b, c = p[:, 1] - p[:, 0], p[:, 2] - p[:, 0], p[:, 3] - p[:, 0]
    return np.einsum("ij,ij->i", a, np.cross(b, c)) / 6.0


def _circumspheres(p: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Circumcenters and squared radii of (k, 4, 3) tetra corner arrays.

    Solves 2 (p_i - p_0) . c = |p_i - p_0|^2 with the origin shifted to p_0,
    which stays well conditioned even for far-away super vertices. Degenerate
    tetrahedra get an infinite radius so any later point destroys them.
    """
    rel = p[:, 1:] - p[:, 0:1]  # (k, 3, 3)
    mat = 2.0 * rel
    rhs = np.einsum("kij,kij->ki", rel, rel)
    det = np.linalg.det(mat)
    centers = np.empty((len(p), 3))
    rad2 = np.empty(len(p))
    good = np.abs(det) > 1e-300
    if np.any(good):
        sol = np.linalg.solve(mat[good], rhs[good][..., None])[..., 0]
        centers[good] = p[good, 0] + sol
        rad2[good] = np.einsum("ki,ki->k", sol, sol)
    bad = ~good
    if np.any(bad):
        centers[bad] = p[bad, 0]
        rad2[bad] = np.inf
    finite = np.isfinite(rad2) & np.all(np.isfinite(centers), axis=1)
    centers[~finite] = p[~finite, 0]
    rad2[~finite] = np.inf
    return centers, rad2


def _merge_duplicates(points: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Collapse points closer than DUPLICATE_TOL; returns (unique, original index map)."""
    keep: list[int] = []
    for i in range(len(points)):
        dup = False
        for k in keep:
            if np.linalg.norm(points[i] - points[k]) < DUPLICATE_TOL:
                dup = True
                break
        if not dup:
            keep.append(i)
    if len(keep) != len(points):
        warnings.warn(f"merged {len(points) - len(keep)} duplicate point(s)", stacklevel=3)
    return points[keep], np.asarray(keep, dtype=int)


def _super_tetrahedron(points: np.ndarray, margin: float) -> np.ndarray:
    center = points.mean(axis=0)
    radius = max(np.max(np.linalg.norm(points - center, axis=1)), 1.0)
    dirs = np.array([[1, 1, 1], [1, -1, -1], [-1, 1, -1], [-1, -1, 1]], dtype=float) / np.sqrt(3)
    # a regular tetrahedron with vertex distance L has insphere radius L/3
    return center + dirs * (3.0 * margin * radius)


def _tet_faces(tet) -> tuple[tuple[int, int, int], ...]:
    a, b, c, d = tet
    return (
        tuple(sorted((a, b, c))),
        tuple(sorted((a, b, d))),
        tuple(sorted((a, c, d))),
        tuple(sorted((b, c, d))),
    )


def _circumcircle(a: np.ndarray, b: np.ndarray, c: np.ndarray) -> tuple[np.ndarray, float]:
    """Circumcircle of a 3D triangle via the 2x2 Gram solve in its plane."""
    ab, ac = b - a, c - a
    g11, g12, g22 = ab @ ab, ab @ ac, ac @ ac
    det = g11 * g22 - g12 * g12
    if abs(det) < 1e-300:
        return a, np.inf
    x = (0.5 * g11 * g22 - 0.5 * g22 * g12) / det
    y = (0.5 * g22 * g11 - 0.5 * g11 * g12) / det
    center = a + x * ab + y * ac
    return center, float(np.linalg.norm(center - a))


class _TetStore:
    """Tetrahedra plus the data their in-sphere predicate needs.

    Cells with exactly one super vertex use the point-at-infinity predicate:
    a point is inside the (limit) circumsphere iff it lies strictly on the
    super side of the plane through the three finite vertices, with coplanar
    ties resolved by the in-circle test on that face. All other cells use the
    numeric circumsphere. This keeps hull coverage independent of where the
    finite super vertices actually sit.
    """

    def __init__(self, coords: np.ndarray, n_input: int, tets: list[tuple[int, int, int, int]]):
        self.coords = coords
        self.n_input = n_input
        self.tets = tets
        arr = np.asarray(tets)
        self.centers, self.rad2 = _circumspheres(coords[arr])
        self.sym = np.zeros(len(tets), dtype=bool)
        self.normals = np.zeros((len(tets), 3))
        self.base = np.zeros(len(tets), dtype=int)
        self.faces: list[tuple[int, int, int] | None] = [None] * len(tets)
        for k, tet in enumerate(tets):
            sup = [v for v in tet if v >= n_input]
            if len(sup) != 1:
                continue
            fin = [v for v in tet if v < n_input]
            a, b, c = (coords[v] for v in fin)
            normal = np.cross(b - a, c - a)
            if normal @ (coords[sup[0]] - a) < 0:
                fin = [fin[0], fin[2], fin[1]]
                normal = -normal
            self.sym[k] = True
            self.normals[k] = normal
            self.base[k] = fin[0]
            self.faces[k] = tuple(fin)

    def inside(self, p: np.ndarray) -> np.ndarray:
        # Ties (cospherical/cocircular within round-off) count as inside, so
        # the newest point consistently re-triangulates degenerate shells
        # instead of leaving contradictory diagonals behind.
        out = np.zeros(len(self.tets), dtype=bool)
        num = ~self.sym
        diff = self.centers[num] - p
        out[num] = np.einsum("kj,kj->k", diff, diff) <= self.rad2[num] * (1.0 + 1e-12)
        sym_idx = np.nonzero(self.sym)[0]
        if len(sym_idx):
            d = p - self.coords[self.base[sym_idx]]
            val = np.einsum("kj,kj->k", self.normals[sym_idx], d)
            scale = np.linalg.norm(self.normals[sym_idx], axis=1) * (
                np.linalg.norm(d, axis=1) + 1e-30
            )
            tol = 1e-12 * scale
            out[sym_idx] = val > tol
            for k in sym_idx[np.abs(val) <= tol]:
                a, b, c = (self.coords[v] for v in self.faces[k])
                center, radius = _circumcircle(a, b, c)
                out[k] = bool(
                    np.isfinite(radius)
                    and np.linalg.norm(p - center) <= radius * (1.0 + 1e-12)
                )
        return out

    def replace(self, bad: np.ndarray, new_tets: list[tuple[int, int, int, int]]) -> "_TetStore":
        keep = np.ones(len(self.tets), dtype=bool)
        keep[bad] = False
        kept = [t for t, k in zip(self.tets, keep) if k]
        fresh = _TetStore(self.coords, self.n_input, new_tets)
        merged = _TetStore.__new__(_TetStore)
        merged.coords = self.coords
        merged.n_input = self.n_input
        merged.tets = kept + new_tets
        merged.centers = np.vstack([self.centers[keep], fresh.centers])
        merged.rad2 = np.concatenate([self.rad2[keep], fresh.rad2])
        merged.sym = np.concatenate([self.sym[keep], fresh.sym])
        merged.normals = np.vstack([self.normals[keep], fresh.normals])
        merged.base = np.concatenate([self.base[keep], fresh.base])
        merged.faces = [f for f, k in zip(self.faces, keep) if k] + fresh.faces
        return merged


def _bowyer_watson(points: np.ndarray, margin: float) -> np.ndarray:
    n = len(points)
    coords = np.vstack([points, _super_tetrahedron(points, margin)])
    store = _TetStore(coords, n, [(n, n + 1, n + 2, n + 3)])

    for i in range(n):
        bad = np.nonzero(store.inside(coords[i]))[0]
        if len(bad) == 0:
            # the tetrahedra tile the super-tetrahedron, so every inserted
            # point sits inside at least one circumsphere
            raise DataError("point outside triangulation; input may be degenerate")
        face_count: dict[tuple[int, int, int], int] = {}
        for b in bad:
            for face in _tet_faces(store.tets[b]):
                face_count[face] = face_count.get(face, 0) + 1
        boundary = [f for f, cnt in face_count.items() if cnt == 1]
        new_tets = [(f[0], f[1], f[2], i) for f in boundary]
        store = store.replace(bad, new_tets)

    final = np.asarray([t for t in store.tets if max(t) < n], dtype=int).reshape(-1, 4)
    if len(final):
        # cospherical shells can leave flat slivers behind; they carry no
        # volume and an unbounded circumsphere, so drop them
        extent = float(np.max(points.max(axis=0) - points.min(axis=0)))
        final = final[np.abs(tet_volumes(points, final)) > 1e-12 * extent**3]
    # canonical ordering for deterministic output
    final = np.sort(final, axis=1)
    final = final[np.lexsort(final.T[::-1])]
    return final


def _empty_circumsphere_violation(points: np.ndarray, tets: np.ndarray) -> bool:
    if len(tets) == 0:
        return False
    centers, rad2 = _circumspheres(points[tets])
    if not np.all(np.isfinite(rad2)):
        return True  # a surviving degenerate tetrahedron is itself a violation
    rad = np.sqrt(rad2)
    for t in range(len(tets)):
        d = np.linalg.norm(points - centers[t], axis=1)
        inside = (rad[t] - d) / rad[t] > INSPHERE_REL_TOL
        inside[tets[t]] = False  # corners are on the sphere, not inside
        if np.any(inside):
            return True
    return False


def _coverage_violation(points: np.ndarray, tets: np.ndarray) -> bool:
    """True when the tetrahedra fail to tile the convex hull.

    The finite triangulation tiles conv(points) exactly when each of its
    boundary faces (faces owned by a single tetrahedron) is a hull face, i.e.
    no point lies strictly on its outer side.
    """
    if len(tets) == 0:
        return True
    face_count: dict[tuple[int, int, int], int] = {}
    for tet in tets:
        for face in _tet_faces(tet):
            face_count[face] = face_count.get(face, 0) + 1
    extent = float(np.max(points.max(axis=0) - points.min(axis=0)))
    for face, cnt in face_count.items():
        if cnt != 1:
            continue
        a, b, c = points[face[0]], points[face[1]], points[face[2]]
        normal = np.cross(b - a, c - a)
        side = (points - a) @ normal
        tol = 1e-9 * np.linalg.norm(normal) * extent
        if np.any(side > tol) and np.any(side < -tol):
            return True
    return False


def delaunay3d(points) -> np.ndarray:
    """Delaunay tetrahedralization of >= 4 non-coplanar points.

    Returns an (M, 4) int array of indices into the input; indices of merged
    duplicates resolve to the first occurrence. Every output tetrahedron has
    an empty circumsphere at 1e-9 relative tolerance.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 3:
        raise DataError(f"points must be (N, 3), got {pts.shape}")
    if not np.all(np.isfinite(pts)):
        raise DataError("points contain non-finite values")
    unique, index_map = _merge_duplicates(pts)
    if len(unique) < 4:
        raise DataError(f"need at least 4 distinct points, got {len(unique)}")
    centered = unique - unique.mean(axis=0)
    svals = np.linalg.svd(centered, compute_uv=False)
    if svals[2] <= COPLANAR_TOL * max(svals[0], 1e-300):
        raise DataError("points are coplanar within tolerance; cannot tetrahedralize")

    margin = 1e3
    for _ in range(3):
        try:
            tets = _bowyer_watson(unique, margin)
        except DataError:
            margin *= 100.0
            continue
        if (
            len(tets)
            and not _empty_circumsphere_violation(unique, tets)
            and not _coverage_violation(unique, tets)
        ):
            return index_map[tets]
        margin *= 100.0
    raise DataError("tetrahedralization failed the empty-circumsphere self-check")


def farthest_point_subsample(vertices: np.ndarray, count: int) -> np.ndarray:
    """Deterministic farthest-point sampling; returns sorted vertex indices.

    Seeds at vertex 0 and greedily adds the vertex farthest from the chosen
    set (ties resolve to the lowest index).
    """
    verts = np.asarray(vertices, dtype=float)
    if count >= len(verts):
        return np.arange(len(verts))
    chosen = [0]
    dist = np.linalg.norm(verts - verts[0], axis=1)
    while len(chosen) < count:
        nxt = int(np.argmax(dist))
        chosen.append(nxt)
        dist = np.minimum(dist, np.linalg.norm(verts - verts[nxt], axis=1))
    return np.array(sorted(chosen), dtype=int)


@dataclass(frozen=True)
class RetentionRule:
    """Which Delaunay tetrahedra count as interaction structure.

    strict keeps the two-joints-one-object-vertex-one-other-joint pattern
    (either agent contributing the pair); with no second agent it falls back
    to the HOI rule (>= 1 agent joint and >= 1 object vertex). loose keeps any
    tetrahedron with at least one object vertex and one agent joint.
    proximity_gate, when set, drops joints farther than this from every
    (already subsampled) object vertex before triangulating.
    """

    mode: str = "strict"  # "strict" | "loose"
    proximity_gate: float | None = 0.5  # meters

    def __post_init__(self):
        if self.mode not in ("strict", "loose"):
            raise DataError(f"unknown retention mode {self.mode!r}")
        if self.proximity_gate is not None and self.proximity_gate <= 0:
            raise DataError("proximity gate must be positive when set")


@dataclass(frozen=True)
class PointCloud:
    """Combined point cloud with per-point provenance.

    provenance entries are (kind, index) with kind in {"A", "B", "obj"} and
    index the joint index (agents) or subsampled-vertex position (object).
    """

    coordinates: np.ndarray  # (N, 3)
    provenance: tuple[tuple[str, int], ...]


@dataclass(frozen=True)
class InteractMesh:
    points: PointCloud
    tetrahedra: np.ndarray  # (M, 4) indices into points
    reference_laplacians: np.ndarray  # (M, 4, 3)

    @property
    def tet_count(self) -> int:
        return len(self.tetrahedra)


def _retained(kinds: np.ndarray, tets: np.ndarray, volumes: np.ndarray,
              mode: str, two_agents: bool) -> np.ndarray:
    keep = np.zeros(len(tets), dtype=bool)
    for m, tet in enumerate(tets):
        if abs(volumes[m]) <= DEGENERATE_VOLUME:
            continue
        k = kinds[tet]
        n_a = int(np.sum(k == 0))
        n_b = int(np.sum(k == 1))
        n_o = int(np.sum(k == 2))
        if mode == "loose" or not two_agents:
            keep[m] = n_o >= 1 and (n_a + n_b) >= 1
        else:
            keep[m] = n_o == 1 and ((n_a == 2 and n_b == 1) or (n_b == 2 and n_a == 1))
    return keep


def build_interact_mesh(
    joints_a: np.ndarray,
    joints_b: np.ndarray | None,
    obj_vertices: np.ndarray,
    rule: RetentionRule | None = None,
) -> InteractMesh:
    """Delaunay over the combined cloud, filtered by the retention rule.

    joints are world-frame (J, 3) arrays; obj_vertices world-frame and already
    subsampled. Raises EmptyInteractMeshError when nothing survives, which
    signals the caller to skip the Laplacian term for this frame.
    """
    rule = rule or RetentionRule()
    joints_a = np.asarray(joints_a, dtype=float).reshape(-1, 3)
    obj_vertices = np.asarray(obj_vertices, dtype=float).reshape(-1, 3)
    joints_b = (
        np.zeros((0, 3)) if joints_b is None else np.asarray(joints_b, dtype=float).reshape(-1, 3)
    )
    if len(obj_vertices) == 0:
        raise EmptyInteractMeshError("no object vertices")

    def gated(joints: np.ndarray) -> np.ndarray:
        if rule.proximity_gate is None or len(joints) == 0:
            return np.arange(len(joints))
        d = np.linalg.norm(joints[:, None, :] - obj_vertices[None, :, :], axis=2).min(axis=1)
        return np.nonzero(d <= rule.proximity_gate)[0]

    idx_a = gated(joints_a)
    idx_b = gated(joints_b)
    coords = np.vstack([joints_a[idx_a], joints_b[idx_b], obj_vertices])
    provenance = (
        [(AGENT_A, int(j)) for j in idx_a]
        + [(AGENT_B, int(j)) for j in idx_b]
        + [(OBJECT, v) for v in range(len(obj_vertices))]
    )
    if len(coords) < 4:
        raise EmptyInteractMeshError(
            f"only {len(coords)} point(s) within the proximity gate"
        )
    try:
        tets = delaunay3d(coords)
    except DataError as exc:
        raise EmptyInteractMeshError(f"degenerate interaction cloud: {exc}") from exc

    kinds = np.array([{AGENT_A: 0, AGENT_B: 1, OBJECT: 2}[p[0]] for p in provenance])
    volumes = tet_volumes(coords, tets)
    keep = _retained(kinds, tets, volumes, rule.mode, two_agents=len(idx_b) > 0)
    retained = tets[keep]
    if len(retained) == 0:
        raise EmptyInteractMeshError("no tetrahedron satisfied the retention rule")
    return InteractMesh(
        points=PointCloud(coordinates=coords, provenance=tuple(provenance)),
        tetrahedra=retained,
        reference_laplacians=laplacians(coords[retained]),
    )


def mesh_to_dict(mesh: InteractMesh) -> dict:
    """JSON-ready dump of an interact mesh for CLI inspection."""
    return {
        "points": [
            {"kind": kind, "index": idx, "position": [float(c) for c in coord]}
            for (kind, idx), coord in zip(mesh.points.provenance, mesh.points.coordinates)
        ],
        "tetrahedra": [[int(i) for i in tet] for tet in mesh.tetrahedra],
        "reference_laplacians": [
            [[float(x) for x in row] for row in lap] for lap in mesh.reference_laplacians
        ],
    }
