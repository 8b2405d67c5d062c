"""Conforming 2D triangulations with newest-vertex bisection.

Meshes are immutable values: refine() returns a new mesh whose vertex list
extends the input's, so the whole adaptive history stays inspectable.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ClosureError, ConformityError, GeometryError, ParseError


@dataclass
class DomainSpec:
    kind: str
    bounds: tuple[float, float, float, float] | None = None
    vertices: np.ndarray | None = None
    elements: np.ndarray | None = None

    @classmethod
    def unit_square(cls):
        return cls("unit_square")

    @classmethod
    def rectangle(cls, x0, x1, y0, y1):
        return cls("rectangle", bounds=(float(x0), float(x1), float(y0), float(y1)))

    @classmethod
    def l_shape(cls):
        return cls("l_shape")

    @classmethod
    def explicit(cls, vertices, elements):
        return cls(
            "explicit",
            vertices=np.asarray(vertices, dtype=float),
            elements=np.asarray(elements, dtype=np.int64),
        )


@dataclass
class Mesh:
    vertices: np.ndarray        # (nv, 2)
    elements: np.ndarray        # (ne, 3) vertex indices, positively oriented
    ref_edge: np.ndarray        # (ne,) local index of refinement edge (opposite vertex)
    boundary_edges: np.ndarray  # (nb, 2)
    generation: np.ndarray      # (ne,) bisection depth
    parent: np.ndarray          # (ne,) ancestor index in the parent mesh, -1 if carried over
    vertex_parents: np.ndarray = field(default=None)  # (nv, 2) edge endpoints, -1 for input vertices

    def __post_init__(self):
        if self.vertex_parents is None:
            self.vertex_parents = np.full((len(self.vertices), 2), -1, dtype=np.int64)

    @property
    def num_vertices(self):
        return len(self.vertices)

    @property
    def num_elements(self):
        return len(self.elements)

    def element_coords(self):
        """(ne, 3, 2) vertex coordinates per element."""
        return self.vertices[self.elements]

    def edge_vertices(self, t, local):
        """Vertex pair of the edge opposite local vertex `local` of element t."""
        tri = self.elements[t]
        return int(tri[(local + 1) % 3]), int(tri[(local + 2) % 3])


@dataclass
class QualityReport:
    h_max: float
    h_min: float
    max_ratio: float
    conforming: bool


def _signed_areas(vertices, elements):
    p = vertices[elements]
    return 0.5 * (
        (p[:, 1, 0] - p[:, 0, 0]) * (p[:, 2, 1] - p[:, 0, 1])
        - (p[:, 2, 0] - p[:, 0, 0]) * (p[:, 1, 1] - p[:, 0, 1])
    )


def _edge_lengths(vertices, elements):
    """(ne, 3): length of the edge opposite each local vertex."""
    p = vertices[elements]
    out = np.empty((len(elements), 3))
    for loc in range(3):
        a = p[:, (loc + 1) % 3]
        b = p[:, (loc + 2) % 3]
        out[:, loc] = np.hypot(*(a - b).T)
    return out


def _edge_incidence(elements):
    """Map frozen undirected edge -> list of (element, local index)."""
    inc = {}
    for t, tri in enumerate(elements):
        for loc in range(3):
            key = frozenset((int(tri[(loc + 1) % 3]), int(tri[(loc + 2) % 3])))
            inc.setdefault(key, []).append((t, loc))
    return inc


def _initial_ref_edges(vertices, elements):
    """Longest edge of each element, ties broken by lowest opposite-vertex index."""
    lengths = _edge_lengths(vertices, elements)
    out = np.empty(len(elements), dtype=np.int64)
    for t in range(len(elements)):
        top = lengths[t].max() * (1.0 - 1e-12)
        cand = [loc for loc in range(3) if lengths[t, loc] >= top]
        out[t] = min(cand, key=lambda loc: elements[t][loc])
    return out


def _boundary_from_incidence(inc):
    return np.array(
        sorted(tuple(sorted(k)) for k, v in inc.items() if len(v) == 1),
        dtype=np.int64,
    ).reshape(-1, 2)


def check_conformity(vertices, elements):
    """Full edge-incidence audit. Returns True/False, no exceptions."""
    inc = _edge_incidence(elements)
    for key, hits in inc.items():
        if len(hits) > 2:
            return False
    # hanging node: a vertex strictly inside a once-counted edge
    single = [tuple(k) for k, v in inc.items() if len(v) == 1]
    used = np.unique(elements)
    for a, b in single:
        pa, pb = vertices[a], vertices[b]
        d = pb - pa
        ll = d @ d
        for v in used:
            if v == a or v == b:
                continue
            pv = vertices[v]
            t = (pv - pa) @ d / ll
            if 1e-12 < t < 1 - 1e-12:
                proj = pa + t * d
                if np.hypot(*(pv - proj)) < 1e-12 * np.sqrt(ll):
                    return False
    return True


def create_initial_mesh(domain: DomainSpec) -> Mesh:
    if domain.kind == "unit_square":
        return create_initial_mesh(DomainSpec.rectangle(0.0, 1.0, 0.0, 1.0))
    if domain.kind == "rectangle":
        x0, x1, y0, y1 = domain.bounds
        vertices = np.array([[x0, y0], [x1, y0], [x1, y1], [x0, y1]])
        elements = np.array([[0, 1, 2], [0, 2, 3]], dtype=np.int64)
    elif domain.kind == "l_shape":
        # (-1,1)^2 minus [0,1) x (-1,0]; diagonals meet the reentrant corner
        vertices = np.array(
            [
                [-1.0, -1.0], [0.0, -1.0], [0.0, 0.0], [-1.0, 0.0],
                [-1.0, 1.0], [0.0, 1.0], [1.0, 1.0], [1.0, 0.0],
            ]
        )
        elements = np.array(
            [
                [0, 1, 2], [0, 2, 3],
                [3, 2, 5], [3, 5, 4],
                [2, 7, 6], [2, 6, 5],
            ],
            dtype=np.int64,
        )
    elif domain.kind == "explicit":
        vertices = np.array(domain.vertices, dtype=float)
        elements = np.array(domain.elements, dtype=np.int64)
    else:
        raise ValueError(f"unknown domain kind {domain.kind!r}")

    areas = _signed_areas(vertices, elements)
    if np.any(areas <= 0):
        bad = int(np.argmin(areas))
        raise GeometryError(f"element {bad} has signed area {areas[bad]:.3e}")
    inc = _edge_incidence(elements)
    if not check_conformity(vertices, elements):
        raise ConformityError("input triangulation is not conforming")
    return Mesh(
        vertices=vertices,
        elements=elements,
        ref_edge=_initial_ref_edges(vertices, elements),
        boundary_edges=_boundary_from_incidence(inc),
        generation=np.zeros(len(elements), dtype=np.int64),
        parent=np.full(len(elements), -1, dtype=np.int64),
    )


class _RefineState:
    def __init__(self, mesh: Mesh, depth_bound: int):
        self.vx = [tuple(v) for v in mesh.vertices]
        self.vparents = [tuple(p) for p in mesh.vertex_parents]
        self.tri = [tuple(int(i) for i in t) for t in mesh.elements]
        self.ref = [int(r) for r in mesh.ref_edge]
        self.gen = [int(g) for g in mesh.generation]
        self.anc = list(range(len(self.tri)))  # ancestor in the input mesh
        self.alive = [True] * len(self.tri)
        self.midpoint = {}
        self.edge2elems = {}
        for t in range(len(self.tri)):
            self._register(t)
        self.budget = depth_bound

    def _edges(self, t):
        a, b, c = self.tri[t]
        return [frozenset((b, c)), frozenset((c, a)), frozenset((a, b))]

    def _register(self, t):
        for key in self._edges(t):
            self.edge2elems.setdefault(key, set()).add(t)

    def _unregister(self, t):
        for key in self._edges(t):
            self.edge2elems[key].discard(t)

    def ref_edge_key(self, t):
        return self._edges(t)[self.ref[t]]

    def neighbor_across(self, t, key):
        for s in self.edge2elems.get(key, ()):
            if s != t:
                return s
        return None

    def _midpoint_vertex(self, key):
        if key in self.midpoint:
            return self.midpoint[key]
        a, b = sorted(key)
        pa, pb = self.vx[a], self.vx[b]
        self.vx.append(((pa[0] + pb[0]) / 2.0, (pa[1] + pb[1]) / 2.0))
        self.vparents.append((a, b))
        idx = len(self.vx) - 1
        self.midpoint[key] = idx
        return idx

    def _bisect(self, t, m):
        r = self.ref[t]
        tri = self.tri[t]
        c, a, b = tri[r], tri[(r + 1) % 3], tri[(r + 2) % 3]
        self._unregister(t)
        self.alive[t] = False
        for child, refloc in (((c, a, m), 2), ((c, m, b), 1)):
            self.tri.append(child)
            self.ref.append(refloc)
            self.gen.append(self.gen[t] + 1)
            self.anc.append(self.anc[t])
            self.alive.append(True)
            self._register(len(self.tri) - 1)

    def ensure_bisected(self, t):
        stack = [t]
        while stack:
            self.budget -= 1
            if self.budget < 0:
                raise ClosureError(
                    "conformity closure exceeded depth bound "
                    "(inconsistent refinement-edge tags?)"
                )
            cur = stack[-1]
            if not self.alive[cur]:
                stack.pop()
                continue
            key = self.ref_edge_key(cur)
            nb = self.neighbor_across(cur, key)
            if nb is not None and self.ref_edge_key(nb) != key:
                stack.append(nb)
                continue
            m = self._midpoint_vertex(key)
            self._bisect(cur, m)
            if nb is not None:
                self._bisect(nb, m)
            stack.pop()


def refine(mesh: Mesh, marked, depth_bound: int | None = None) -> Mesh:
    """Bisect every marked element at least once and close for conformity."""
    marked = sorted(set(int(i) for i in marked))
    if marked and (marked[0] < 0 or marked[-1] >= mesh.num_elements):
        raise IndexError("marked element index out of range")
    if not marked:
        return mesh
    if depth_bound is None:
        depth_bound = 100 * mesh.num_elements
    st = _RefineState(mesh, depth_bound)
    for t in marked:
        if st.alive[t]:
            st.ensure_bisected(t)

    keep = [i for i, a in enumerate(st.alive) if a]
    elements = np.array([st.tri[i] for i in keep], dtype=np.int64)
    new = Mesh(
        vertices=np.array(st.vx),
        elements=elements,
        ref_edge=np.array([st.ref[i] for i in keep], dtype=np.int64),
        boundary_edges=_boundary_from_incidence(_edge_incidence(elements)),
        generation=np.array([st.gen[i] for i in keep], dtype=np.int64),
        parent=np.array(
            [st.anc[i] if i >= mesh.num_elements else -1 for i in keep],
            dtype=np.int64,
        ),
        vertex_parents=np.array(st.vparents, dtype=np.int64),
    )
    return new


def uniform_refine(mesh: Mesh, times: int = 1) -> Mesh:
    """Halve the mesh size `times` times (two full bisection passes per step)."""
    for _ in range(2 * times):
        mesh = refine(mesh, range(mesh.num_elements))
    return mesh


def mesh_quality(mesh: Mesh) -> QualityReport:
    if mesh.num_elements == 0:
        raise ValueError("empty mesh")
    lengths = _edge_lengths(mesh.vertices, mesh.elements)
    h = lengths.max(axis=1)
    areas = _signed_areas(mesh.vertices, mesh.elements)
    semi = 0.5 * lengths.sum(axis=1)
    rho = 2.0 * areas / semi  # twice the inradius
    return QualityReport(
        h_max=float(h.max()),
        h_min=float(h.min()),
        max_ratio=float((h / rho).max()),
        conforming=check_conformity(mesh.vertices, mesh.elements),
    )


def element_sizes(mesh: Mesh) -> np.ndarray:
    """Element diameters h_tau."""
    return _edge_lengths(mesh.vertices, mesh.elements).max(axis=1)


def export_mesh(mesh: Mesh) -> str:
    lines = [f"vertices {mesh.num_vertices} elements {mesh.num_elements}"]
    for x, y in mesh.vertices:
        lines.append(f"{float(x):.17g} {float(y):.17g}")
    for tri, r in zip(mesh.elements, mesh.ref_edge):
        lines.append(f"{int(tri[0])} {int(tri[1])} {int(tri[2])} {int(r)}")
    return "\n".join(lines) + "\n"


def import_mesh(text: str) -> Mesh:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise ParseError("empty mesh file")
    head = lines[0].split()
    if len(head) != 4 or head[0] != "vertices" or head[2] != "elements":
        raise ParseError(f"bad header: {lines[0]!r}")
    nv, ne = int(head[1]), int(head[3])
    if len(lines) != 1 + nv + ne:
        raise ParseError(f"expected {1 + nv + ne} lines, got {len(lines)}")
    vertices = np.array([[float(t) for t in ln.split()] for ln in lines[1 : 1 + nv]])
    rows = [[int(t) for t in ln.split()] for ln in lines[1 + nv :]]
    elements = np.array([r[:3] for r in rows], dtype=np.int64)
    ref = np.array([r[3] for r in rows], dtype=np.int64)
    areas = _signed_areas(vertices, elements)
    if np.any(areas <= 0):
        raise GeometryError("imported element with nonpositive area")
    inc = _edge_incidence(elements)
    if not check_conformity(vertices, elements):
        raise ConformityError("imported triangulation is not conforming")
    return Mesh(
        vertices=vertices,
        elements=elements,
        ref_edge=ref,
        boundary_edges=_boundary_from_incidence(inc),
        generation=np.zeros(ne, dtype=np.int64),
        parent=np.full(ne, -1, dtype=np.int64),
    )
