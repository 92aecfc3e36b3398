"""Space-time simplicial meshes on (1+1)-dimensional slabs.

Coordinates are ordered ``(t, x)``: column 0 of the vertex array is time,
column 1 is space.  Tensor meshes are built by splitting each cell of an
``nt x nx`` grid along the anti-diagonal, so that no interior facet is
aligned with the characteristic direction ``(1, a)`` for moderate positive
velocities ``a`` (a main-diagonal split would put facets exactly along the
characteristics of ``a = 1`` and produce zero upwind flux there).

Adaptive refinement uses newest-vertex bisection with recursive conformity
closure.  Element vertex order is "peak first": local vertex 0 is the
newest vertex and the refinement edge is (v1, v2).  The initial grid
assigns peaks at the right-angle corners, so all refinement edges are
anti-diagonal hypotenuses and the initial mesh is compatibly divisible.

Boundary facets carry a side label (``tmin``, ``tmax``, ``xlo``, ``xhi``)
recorded at construction and inherited under deformation and refinement;
:func:`classify_boundary` maps side labels to boundary condition tags.
"""

from __future__ import annotations

import heapq
import io
import numpy as np

__all__ = [
    "SpaceTimeMesh",
    "DeformationMap",
    "RefinementBudgetError",
    "build_st_mesh",
    "deform_mesh",
    "classify_boundary",
    "bisect_refine",
    "extract_slab",
    "validate_mesh",
    "write_mesh",
    "read_mesh",
    "SIDE_NAMES",
    "TAG_INTERIOR",
    "TAG_DIRICHLET",
    "TAG_NEUMANN",
    "TAG_FINAL",
]

SIDE_NAMES = ("tmin", "tmax", "xlo", "xhi")
_SIDE_ID = {name: i for i, name in enumerate(SIDE_NAMES)}

TAG_INTERIOR = 0
TAG_DIRICHLET = 1
TAG_NEUMANN = 2  # inflow-like: -zeta*u*a_n + nu*grad(u).n = g_N
TAG_FINAL = 3  # outflow top surface; Neumann-type with vanishing data

# local edge l is opposite local vertex l
_LOCAL_EDGES = ((1, 2), (2, 0), (0, 1))


class RefinementBudgetError(RuntimeError):
    """Raised when conformity closure would exceed the element budget."""


class SpaceTimeMesh:
    """Conforming triangulation of a space-time slab.

    Parameters
    ----------
    vertices : ndarray (nv, 2)
        Coordinates (t, x).
    elements : ndarray (ne, 3)
        Vertex indices, positively oriented, peak-first.
    slab_index : ndarray (ne,)
        Time-slab index of each element.
    side_of_edge : dict
        Maps sorted boundary vertex pairs to side ids (see SIDE_NAMES).
    mode : str
        "all_at_once" or "slab".
    box : tuple
        (t0, tN, xlo, xhi) of the undeformed bounding box.

    Derived connectivity (computed once):

    - ``facets`` (nf, 2): sorted vertex pairs, lexicographically ordered.
    - ``facet_elems`` (nf, 2): adjacent element ids, -1 where absent.
    - ``facet_normals`` (nf, 2, 2): unit outward normal per adjacent side.
    - ``facet_lengths`` (nf,), ``elem_facets`` (ne, 3).
    - ``boundary_sides`` (nf,): side id, -1 for interior facets.
    - ``boundary_tags`` (nf,): condition tags, all interior until
      :func:`classify_boundary` runs.
    """

    def __init__(self, vertices, elements, slab_index, side_of_edge, mode, box,
                 n_slabs=None, lineage=None, refinement_tree=None):
        self.vertices = np.asarray(vertices, dtype=float)
        self.elements = np.asarray(elements, dtype=np.int64)
        self.slab_index = np.asarray(slab_index, dtype=np.int64)
        self.side_of_edge = dict(side_of_edge)
        self.mode = mode
        self.box = tuple(float(v) for v in box)
        self.n_slabs = int(n_slabs) if n_slabs is not None else int(self.slab_index.max()) + 1
        self.lineage = lineage
        self.refinement_tree = refinement_tree
        self.neumann_sides = None  # set by classify_boundary
        self._build_connectivity()

    # -- construction ---------------------------------------------------

    def _build_connectivity(self):
        v, e = self.vertices, self.elements
        ne = len(e)
        if self.slab_index.shape != (ne,):
            raise ValueError("slab_index shape mismatch")
        d1 = v[e[:, 1]] - v[e[:, 0]]
        d2 = v[e[:, 2]] - v[e[:, 0]]
        det = d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0]
        if np.any(det <= 0):
            bad = int(np.argmax(det <= 0))
            raise ValueError(f"element {bad} is not positively oriented")
        self.areas = 0.5 * det

        pairs = {}
        elem_facets = np.empty((ne, 3), dtype=np.int64)
        raw = []
        for k in range(ne):
            for loc, (i, j) in enumerate(_LOCAL_EDGES):
                a, b = int(e[k, i]), int(e[k, j])
                key = (a, b) if a < b else (b, a)
                fid = pairs.get(key)
                if fid is None:
                    fid = len(raw)
                    pairs[key] = fid
                    raw.append([key, [(k, loc)]])
                else:
                    raw[fid][1].append((k, loc))
        # deterministic facet numbering independent of element order
        order = sorted(range(len(raw)), key=lambda f: raw[f][0])
        nf = len(raw)
        self.facets = np.empty((nf, 2), dtype=np.int64)
        self.facet_elems = np.full((nf, 2), -1, dtype=np.int64)
        self.facet_locals = np.full((nf, 2), -1, dtype=np.int64)
        for newf, oldf in enumerate(order):
            key, adj = raw[oldf]
            if len(adj) > 2:
                raise ValueError(f"facet {key} shared by more than two elements")
            self.facets[newf] = key
            for s, (k, loc) in enumerate(sorted(adj)):
                self.facet_elems[newf, s] = k
                self.facet_locals[newf, s] = loc
                elem_facets[k, loc] = newf
        self.elem_facets = elem_facets

        tang = v[self.facets[:, 1]] - v[self.facets[:, 0]]
        self.facet_lengths = np.hypot(tang[:, 0], tang[:, 1])
        mid = 0.5 * (v[self.facets[:, 0]] + v[self.facets[:, 1]])
        base = np.stack([tang[:, 1], -tang[:, 0]], axis=1)
        base /= self.facet_lengths[:, None]
        self.facet_normals = np.zeros((nf, 2, 2))
        centroids = v[e].mean(axis=1)
        for s in range(2):
            has = self.facet_elems[:, s] >= 0
            c = centroids[self.facet_elems[has, s]]
            sign = np.where(np.sum(base[has] * (mid[has] - c), axis=1) >= 0.0, 1.0, -1.0)
            self.facet_normals[has, s, :] = base[has] * sign[:, None]

        self.boundary_sides = np.full(nf, -1, dtype=np.int8)
        is_bnd = self.facet_elems[:, 1] < 0
        for f in np.nonzero(is_bnd)[0]:
            key = (int(self.facets[f, 0]), int(self.facets[f, 1]))
            side = self.side_of_edge.get(key)
            if side is None:
                raise ValueError(f"boundary facet {key} has no side label")
            self.boundary_sides[f] = side
        self.boundary_tags = np.zeros(nf, dtype=np.int8)
        self.element_h = self._element_h()

    def _element_h(self):
        v, e = self.vertices, self.elements
        ls = [np.hypot(*(v[e[:, j]] - v[e[:, i]]).T) for i, j in _LOCAL_EDGES]
        return np.max(ls, axis=0)

    # -- queries --------------------------------------------------------

    @property
    def n_vertices(self):
        return len(self.vertices)

    @property
    def n_elements(self):
        return len(self.elements)

    @property
    def n_facets(self):
        return len(self.facets)

    def boundary_facets(self, tag=None):
        """Indices of boundary facets, optionally restricted to one tag."""
        is_bnd = self.facet_elems[:, 1] < 0
        if tag is None:
            return np.nonzero(is_bnd)[0]
        return np.nonzero(is_bnd & (self.boundary_tags == tag))[0]

    def facet_midpoints(self):
        return 0.5 * (self.vertices[self.facets[:, 0]] + self.vertices[self.facets[:, 1]])

    def replace_vertices(self, vertices):
        """Same topology and labels with new coordinates."""
        m = SpaceTimeMesh(vertices, self.elements, self.slab_index,
                          self.side_of_edge, self.mode, self.box,
                          n_slabs=self.n_slabs, lineage=self.lineage,
                          refinement_tree=self.refinement_tree)
        if self.neumann_sides is not None:
            classify_boundary(m, self.neumann_sides)
        return m


class DeformationMap:
    """Coordinate map applied to undeformed tensor-mesh vertices.

    The default map keeps time fixed and advects space periodically:

        x = x_u + A * (1/2 - x_u) * sin(2*pi*t)

    so the deformation vanishes at t in {0, 1/2, 1} and is strongest at
    quarter periods.  A custom callable mapping an (n, 2) array of (t, x)
    to deformed coordinates may be supplied instead.
    """

    def __init__(self, amplitude=0.1, mapping=None):
        self.amplitude = float(amplitude)
        self._mapping = mapping

    def __call__(self, points):
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        if self._mapping is not None:
            return self._mapping(pts)
        t = pts[:, 0]
        x = pts[:, 1]
        out = np.empty_like(pts)
        out[:, 0] = t
        out[:, 1] = x + self.amplitude * (0.5 - x) * np.sin(2.0 * np.pi * t)
        return out


def build_st_mesh(nx, nt, box=(0.0, 1.0, -0.5, 0.5), mode="all_at_once"):
    """Uniform anti-diagonal-split triangulation of [t0,tN] x [xlo,xhi].

    Parameters
    ----------
    nx, nt : int
        Cells in space and time; 2*nx*nt elements result.
    box : tuple (t0, tN, xlo, xhi)
    mode : {"all_at_once", "slab"}
        Solution strategy tag; geometry is identical, and each row of
        cells forms one time slab (``slab_index`` records the row).
    """
    if nx < 1 or nt < 1:
        raise ValueError("nx and nt must be positive")
    if mode not in ("all_at_once", "slab"):
        raise ValueError(f"unknown mode {mode!r}")
    t0, tN, xlo, xhi = (float(v) for v in box)
    if not (tN > t0 and xhi > xlo):
        raise ValueError("box must have positive extent")
    tv = np.linspace(t0, tN, nt + 1)
    xv = np.linspace(xlo, xhi, nx + 1)
    # vertex (it, ix) -> it*(nx+1) + ix
    vid = lambda it, ix: it * (nx + 1) + ix
    verts = np.empty(((nt + 1) * (nx + 1), 2))
    for it in range(nt + 1):
        for ix in range(nx + 1):
            verts[vid(it, ix)] = (tv[it], xv[ix])
    elems = []
    slabs = []
    for it in range(nt):
        for ix in range(nx):
            v00 = vid(it, ix)
            v10 = vid(it + 1, ix)
            v01 = vid(it, ix + 1)
            v11 = vid(it + 1, ix + 1)
            # peaks at the right-angle corners; refinement edge is the
            # shared anti-diagonal (v10, v01)
            elems.append((v00, v10, v01))
            elems.append((v11, v01, v10))
            slabs.extend((it, it))
    side_of_edge = {}

    def _label(a, b, side):
        side_of_edge[(a, b) if a < b else (b, a)] = _SIDE_ID[side]

    for ix in range(nx):
        _label(vid(0, ix), vid(0, ix + 1), "tmin")
        _label(vid(nt, ix), vid(nt, ix + 1), "tmax")
    for it in range(nt):
        _label(vid(it, 0), vid(it + 1, 0), "xlo")
        _label(vid(it, nx), vid(it + 1, nx), "xhi")
    return SpaceTimeMesh(verts, np.asarray(elems), np.asarray(slabs),
                         side_of_edge, mode, box, n_slabs=nt)


def deform_mesh(mesh, deformation):
    """Apply a :class:`DeformationMap` to the mesh vertices."""
    return mesh.replace_vertices(deformation(mesh.vertices))


def classify_boundary(mesh, neumann_sides=()):
    """Assign boundary condition tags from side labels.

    ``tmin`` is always inflow-like Neumann (the initial condition enters
    through it), ``tmax`` is always the final outflow surface, and
    spatial sides are Dirichlet unless listed in ``neumann_sides``.
    Returns the mesh for chaining.
    """
    for s in neumann_sides:
        if s not in ("xlo", "xhi"):
            raise ValueError(f"neumann_sides may only name spatial sides, got {s!r}")
    tags = np.zeros(mesh.n_facets, dtype=np.int8)
    sides = mesh.boundary_sides
    tags[sides == _SIDE_ID["tmin"]] = TAG_NEUMANN
    tags[sides == _SIDE_ID["tmax"]] = TAG_FINAL
    for name in ("xlo", "xhi"):
        tag = TAG_NEUMANN if name in neumann_sides else TAG_DIRICHLET
        tags[sides == _SIDE_ID[name]] = tag
    mesh.boundary_tags = tags
    mesh.neumann_sides = tuple(neumann_sides)
    return mesh


def bisect_refine(mesh, marked, max_elements=None):
    """Newest-vertex bisection of ``marked`` elements with conformity closure.

    Neighbors whose refinement edge disagrees are refined first
    (recursively); the result is conforming.  Raises
    :class:`RefinementBudgetError` if closure would push the element count
    past ``max_elements``.

    The returned mesh carries ``lineage`` (for each new element, the id of
    the element of ``mesh`` it descends from) and ``refinement_tree``
    (list of ``(parent_id, (child ids...))`` records for split elements).
    """
    verts = [tuple(v) for v in mesh.vertices]
    elems = {i: tuple(int(v) for v in mesh.elements[i]) for i in range(mesh.n_elements)}
    slab = {i: int(mesh.slab_index[i]) for i in range(mesh.n_elements)}
    origin = {i: i for i in range(mesh.n_elements)}
    side = dict(mesh.side_of_edge)
    next_id = mesh.n_elements
    children = {}

    edge2elems = {}
    for i, tri in elems.items():
        for a, b in ((tri[1], tri[2]), (tri[2], tri[0]), (tri[0], tri[1])):
            key = (a, b) if a < b else (b, a)
            edge2elems.setdefault(key, set()).add(i)

    edge_mid = {}

    def _drop(i):
        tri = elems[i]
        for a, b in ((tri[1], tri[2]), (tri[2], tri[0]), (tri[0], tri[1])):
            key = (a, b) if a < b else (b, a)
            edge2elems[key].discard(i)
        del elems[i]

    def _add(tri, sl, org):
        nonlocal next_id
        i = next_id
        next_id += 1
        elems[i] = tri
        slab[i] = sl
        origin[i] = org
        for a, b in ((tri[1], tri[2]), (tri[2], tri[0]), (tri[0], tri[1])):
            key = (a, b) if a < b else (b, a)
            edge2elems.setdefault(key, set()).add(i)
        return i

    def _midpoint(key):
        m = edge_mid.get(key)
        if m is None:
            a, b = key
            pa, pb = verts[a], verts[b]
            verts.append(((pa[0] + pb[0]) / 2.0, (pa[1] + pb[1]) / 2.0))
            m = len(verts) - 1
            edge_mid[key] = m
            if key in side:
                s = side.pop(key)
                side[(min(a, m), max(a, m))] = s
                side[(min(b, m), max(b, m))] = s
        return m

    def _bisect(i):
        # split one element across its refinement edge (v1, v2)
        p, b1, b2 = elems[i]
        key = (b1, b2) if b1 < b2 else (b2, b1)
        m = _midpoint(key)
        sl, org = slab[i], origin[i]
        _drop(i)
        c1 = _add((m, p, b1), sl, org)
        c2 = _add((m, b2, p), sl, org)
        children[i] = (c1, c2)
        return c1, c2

    def _refine(i):
        # iterative closure: refine incompatible neighbors across the
        # refinement edge before splitting i itself
        stack = [i]
        while stack:
            k = stack[-1]
            if k not in elems:
                stack.pop()
                continue
            p, b1, b2 = elems[k]
            key = (b1, b2) if b1 < b2 else (b2, b1)
            nbrs = [j for j in sorted(edge2elems.get(key, ())) if j != k]
            incompatible = None
            for j in nbrs:
                jp, jb1, jb2 = elems[j]
                jkey = (jb1, jb2) if jb1 < jb2 else (jb2, jb1)
                if jkey != key:
                    incompatible = j
                    break
            if incompatible is not None:
                stack.append(incompatible)
                continue
            stack.pop()
            if max_elements is not None and len(elems) + (2 if nbrs else 1) > max_elements:
                raise RefinementBudgetError(
                    f"refinement needs more than {max_elements} elements")
            _bisect(k)
            for j in nbrs:
                _bisect(j)

    for i in sorted(set(int(m) for m in marked)):
        if not 0 <= i < mesh.n_elements:
            raise ValueError(f"marked element {i} out of range")
        if i in elems:  # may already be split by closure
            _refine(i)

    ids = sorted(elems)
    renum = {old: new for new, old in enumerate(ids)}
    new_elems = np.asarray([elems[i] for i in ids], dtype=np.int64)
    new_slab = np.asarray([slab[i] for i in ids], dtype=np.int64)
    lineage = np.asarray([origin[i] for i in ids], dtype=np.int64)

    def _leaves(i):
        if i in children:
            out = []
            for c in children[i]:
                out.extend(_leaves(c))
            return out
        return [renum[i]]

    tree = [(i, tuple(_leaves(i))) for i in sorted(children) if i < mesh.n_elements]
    out = SpaceTimeMesh(np.asarray(verts), new_elems, new_slab, side,
                        mesh.mode, mesh.box, n_slabs=mesh.n_slabs,
                        lineage=lineage, refinement_tree=tree)
    if mesh.neumann_sides is not None:
        classify_boundary(out, mesh.neumann_sides)
    return out


def extract_slab(mesh, n):
    """Stand-alone mesh of time slab ``n``.

    Facets that were interior in the parent become boundary facets of the
    slab mesh: the interface to slab n-1 is labeled ``tmin`` (inflow-like
    Neumann carrying transferred data) and the interface to slab n+1 is
    labeled ``tmax``.  Returns ``(slab_mesh, elem_ids, vertex_ids)`` with
    the parent ids of the slab's elements and vertices.
    """
    keep = np.nonzero(mesh.slab_index == n)[0]
    if len(keep) == 0:
        raise ValueError(f"slab {n} is empty")
    vids = np.unique(mesh.elements[keep].ravel())
    vmap = np.full(mesh.n_vertices, -1, dtype=np.int64)
    vmap[vids] = np.arange(len(vids))
    sub_elems = vmap[mesh.elements[keep]]
    in_slab = np.zeros(mesh.n_elements, dtype=bool)
    in_slab[keep] = True
    side = {}
    for f in range(mesh.n_facets):
        e0, e1 = mesh.facet_elems[f]
        a0 = in_slab[e0] if e0 >= 0 else False
        a1 = in_slab[e1] if e1 >= 0 else False
        if a0 == a1:
            continue  # interior to the slab, or outside it entirely
        if (a0 and e1 >= 0) or (a1 and e0 >= 0):
            other = int(mesh.slab_index[e1 if a0 else e0])
            name = "tmin" if other < n else "tmax"
        else:
            name = SIDE_NAMES[mesh.boundary_sides[f]]
        a, b = (int(vmap[v]) for v in mesh.facets[f])
        side[(a, b) if a < b else (b, a)] = _SIDE_ID[name]
    sub = SpaceTimeMesh(mesh.vertices[vids], sub_elems,
                        np.full(len(keep), n, dtype=np.int64), side,
                        "slab", mesh.box, n_slabs=mesh.n_slabs)
    if mesh.neumann_sides is not None:
        classify_boundary(sub, mesh.neumann_sides)
    return sub, keep, vids


def validate_mesh(mesh, tol=1e-12):
    """Check mesh invariants; raises AssertionError with a description.

    Verifies positive orientation, two-sided facet consistency
    (anti-parallel outward normals), the per-element closed-polygon
    identity (sum of length-weighted outward normals vanishes) and
    conformity (no vertex interior to another element's facet).
    """
    scale = max(abs(v) for v in mesh.box) + 1.0
    assert np.all(mesh.areas > 0), "non-positive element area"
    inner = mesh.facet_elems[:, 1] >= 0
    nsum = mesh.facet_normals[inner, 0] + mesh.facet_normals[inner, 1]
    assert np.abs(nsum).max() < tol if inner.any() else True, \
        "interior facet normals are not anti-parallel"
    for k in range(mesh.n_elements):
        acc = np.zeros(2)
        for loc in range(3):
            f = mesh.elem_facets[k, loc]
            s = 0 if mesh.facet_elems[f, 0] == k else 1
            acc += mesh.facet_lengths[f] * mesh.facet_normals[f, s]
        assert np.abs(acc).max() < tol * scale, f"element {k} normals do not close"
    # conformity: no vertex strictly inside a facet
    va = mesh.vertices[mesh.facets[:, 0]]
    vb = mesh.vertices[mesh.facets[:, 1]]
    d = vb - va
    L2 = np.sum(d * d, axis=1)
    for i, p in enumerate(mesh.vertices):
        tpar = np.sum((p - va) * d, axis=1) / L2
        foot = va + tpar[:, None] * d
        dist = np.hypot(*(p - foot).T)
        on = (dist < tol * scale) & (tpar > tol) & (tpar < 1 - tol)
        on &= (mesh.facets[:, 0] != i) & (mesh.facets[:, 1] != i)
        assert not on.any(), f"vertex {i} hangs on facet {np.nonzero(on)[0]}"
    return True


# -- persistence --------------------------------------------------------


def write_mesh(mesh, path_or_stream):
    """Plain-text mesh format with 17-significant-digit coordinates."""
    own = isinstance(path_or_stream, (str, bytes)) or hasattr(path_or_stream, "__fspath__")
    f = open(path_or_stream, "w", newline="\n") if own else path_or_stream
    try:
        f.write("sthdg-mesh 1\n")
        f.write(f"mode {mesh.mode}\n")
        f.write("box " + " ".join("%.17g" % v for v in mesh.box) + "\n")
        f.write(f"nslabs {mesh.n_slabs}\n")
        ns = mesh.neumann_sides
        f.write("classified " + ("none" if ns is None else ",".join(ns) or "-") + "\n")
        f.write(f"vertices {mesh.n_vertices}\n")
        for t, x in mesh.vertices:
            f.write("%.17g %.17g\n" % (t, x))
        f.write(f"elements {mesh.n_elements}\n")
        for tri, s in zip(mesh.elements, mesh.slab_index):
            f.write("%d %d %d %d\n" % (tri[0], tri[1], tri[2], s))
        items = sorted(mesh.side_of_edge.items())
        f.write(f"boundary {len(items)}\n")
        for (a, b), s in items:
            f.write("%d %d %s\n" % (a, b, SIDE_NAMES[s]))
    finally:
        if own:
            f.close()


def read_mesh(path_or_stream):
    """Inverse of :func:`write_mesh`; coordinates round-trip exactly."""
    own = isinstance(path_or_stream, (str, bytes)) or hasattr(path_or_stream, "__fspath__")
    f = open(path_or_stream, "r") if own else path_or_stream
    try:
        header = f.readline().split()
        if header[:1] != ["sthdg-mesh"]:
            raise ValueError("not a mesh file")
        mode = f.readline().split()[1]
        box = tuple(float(v) for v in f.readline().split()[1:])
        n_slabs = int(f.readline().split()[1])
        cls = f.readline().split()[1]
        nv = int(f.readline().split()[1])
        verts = np.loadtxt(io.StringIO("".join(f.readline() for _ in range(nv))),
                           ndmin=2)
        ne = int(f.readline().split()[1])
        rows = np.loadtxt(io.StringIO("".join(f.readline() for _ in range(ne))),
                          dtype=np.int64, ndmin=2)
        nb = int(f.readline().split()[1])
        side = {}
        for _ in range(nb):
            a, b, name = f.readline().split()
            side[(int(a), int(b))] = _SIDE_ID[name]
    finally:
        if own:
            f.close()
    mesh = SpaceTimeMesh(verts, rows[:, :3], rows[:, 3], side, mode, box,
                         n_slabs=n_slabs)
    if cls != "none":
        classify_boundary(mesh, () if cls == "-" else tuple(cls.split(",")))
    return mesh
