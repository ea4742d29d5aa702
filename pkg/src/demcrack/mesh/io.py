"""Mesh ingestion and dumps.

* Gmsh MSH ASCII 2.2 and 4.1 reader restricted to 2-node lines (type 1) and
  3-node triangles (type 2).  Tagged lines label the matching facets.
* Gmsh 2.2 writer, used for round trips.
* Plain-text dump with ``VERTICES``/``CELLS``/``FACETS`` sections.
"""

from __future__ import annotations

from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .core import STATUS_NAMES, Mesh, MeshError, build_mesh

_STATUS_CODES = {v: k for k, v in STATUS_NAMES.items()}


class MeshParseError(MeshError):
    def __init__(self, message: str, line: Optional[int] = None, section: Optional[str] = None):
        where = []
        if section:
            where.append(f"section ${section}")
        if line is not None:
            where.append(f"line {line}")
        full = f"{message} ({', '.join(where)})" if where else message
        super().__init__(full, ("line", line))
        self.line = line
        self.section = section


class _Lines:
    def __init__(self, text: str):
        self.lines = text.splitlines()
        self.i = 0

    def next(self, section: Optional[str] = None) -> str:
        while self.i < len(self.lines):
            s = self.lines[self.i].strip()
            self.i += 1
            if s:
                return s
        raise MeshParseError("unexpected end of file", self.i, section)

    @property
    def lineno(self) -> int:
        return self.i

    def ints(self, section, n=None):
        s = self.next(section)
        try:
            vals = [int(t) for t in s.split()]
        except ValueError:
            raise MeshParseError(f"expected integers, got {s!r}", self.lineno, section) from None
        if n is not None and len(vals) < n:
            raise MeshParseError(f"expected {n} integers, got {s!r}", self.lineno, section)
        return vals

    def expect(self, token: str, section: str):
        s = self.next(section)
        if s != token:
            raise MeshParseError(f"expected {token}, got {s!r}", self.lineno, section)


def _sections(text: str) -> dict:
    """Map section name -> (first line index, last line index)."""
    out = {}
    lines = text.splitlines()
    current = None
    for i, raw in enumerate(lines):
        s = raw.strip()
        if s.startswith("$End"):
            if current is None or s[4:] != current[0]:
                raise MeshParseError(f"unbalanced {s}", i + 1)
            out[current[0]] = (current[1], i)
            current = None
        elif s.startswith("$"):
            if current is not None:
                raise MeshParseError(f"section ${current[0]} is not closed", i + 1, current[0])
            current = (s[1:], i)
    if current is not None:
        raise MeshParseError(f"section ${current[0]} is not closed", None, current[0])
    return out


def read_gmsh_ascii(path, dirichlet_tags: Sequence[str] = ()) -> Mesh:
    """Read a Gmsh ASCII mesh.

    Triangles become cells (reoriented counter-clockwise), lines become
    ``boundary_tag`` values of the facets joining the same two nodes.  The
    tag is the physical name if ``$PhysicalNames`` is present, else the
    physical id as a string.
    """
    text = Path(path).read_text()
    secs = _sections(text)
    for name in ("MeshFormat", "Nodes", "Elements"):
        if name not in secs:
            raise MeshParseError(f"missing section ${name}", None, name)
    lines = text.splitlines()

    def reader(name):
        a, b = secs[name]
        r = _Lines("\n".join(lines[: b]))
        r.i = a + 1
        return r

    r = reader("MeshFormat")
    fmt = r.next("MeshFormat").split()
    try:
        version, filetype = fmt[0], int(fmt[1])
    except (IndexError, ValueError):
        raise MeshParseError("malformed format line", r.lineno, "MeshFormat") from None
    if filetype != 0:
        raise MeshParseError("binary MSH files are not supported", r.lineno, "MeshFormat")
    if version.startswith("2"):
        parse = _parse_v2
    elif version.startswith("4"):
        parse = _parse_v4
    else:
        raise MeshParseError(f"unsupported MSH version {version}", r.lineno, "MeshFormat")

    names = None
    if "PhysicalNames" in secs:
        names = {}
        r = reader("PhysicalNames")
        n = r.ints("PhysicalNames", 1)[0]
        for _ in range(n):
            s = r.next("PhysicalNames")
            parts = s.split(maxsplit=2)
            if len(parts) < 3:
                raise MeshParseError(f"malformed physical name {s!r}", r.lineno, "PhysicalNames")
            names[int(parts[1])] = parts[2].strip().strip('"')

    nodes, tris, lines_el = parse(reader, secs)

    def tagname(tag, lineno):
        if tag is None:
            return None
        if names is None:
            return str(tag)
        if tag not in names:
            raise MeshParseError(f"physical tag {tag} has no $PhysicalNames entry", lineno,
                                 "Elements")
        return names[tag]

    ids = sorted(nodes)
    index = {t: i for i, t in enumerate(ids)}
    vertices = np.array([nodes[t] for t in ids])
    try:
        cells = np.array([[index[n] for n in tri] for tri, _ in tris], dtype=np.int64)
    except KeyError as exc:
        raise MeshParseError(f"triangle references unknown node {exc.args[0]}", None,
                             "Elements") from None
    if len(cells) == 0:
        raise MeshParseError("no triangles found", None, "Elements")
    used = np.unique(cells)
    remap = -np.ones(len(vertices), dtype=np.int64)
    remap[used] = np.arange(len(used))
    mesh = build_mesh(vertices[used], remap[cells], reorient=True)

    lookup = {tuple(sorted(map(int, fv))): f for f, fv in enumerate(mesh.facet_vertices)}
    for (a, b), tag, lineno in lines_el:
        name = tagname(tag, lineno)
        if name is None:
            continue
        try:
            key = tuple(sorted((int(remap[index[a]]), int(remap[index[b]]))))
        except KeyError:
            raise MeshParseError("line element references unknown node", lineno,
                                 "Elements") from None
        f = lookup.get(key)
        if f is None:
            raise MeshParseError(f"line element ({a}, {b}) is not a mesh facet", lineno,
                                 "Elements")
        mesh.boundary_tag[f] = name
    if dirichlet_tags:
        mesh.set_dirichlet_tags(dirichlet_tags)
    return mesh


def _parse_v2(reader, secs):
    r = reader("Nodes")
    n = r.ints("Nodes", 1)[0]
    nodes = {}
    for _ in range(n):
        s = r.next("Nodes")
        parts = s.split()
        if len(parts) < 3:
            raise MeshParseError(f"malformed node {s!r}", r.lineno, "Nodes")
        nodes[int(parts[0])] = (float(parts[1]), float(parts[2]))
    end = secs["Nodes"][1]
    if r.i != end:
        raise MeshParseError(f"$Nodes count {n} does not match the number of node lines",
                             r.lineno, "Nodes")

    r = reader("Elements")
    n = r.ints("Elements", 1)[0]
    tris, lines_el = [], []
    for _ in range(n):
        vals = r.ints("Elements", 3)
        etype, ntags = vals[1], vals[2]
        tags = vals[3:3 + ntags]
        conn = vals[3 + ntags:]
        phys = tags[0] if ntags > 0 and tags[0] != 0 else None
        if etype == 2 and len(conn) == 3:
            tris.append((conn, phys))
        elif etype == 1 and len(conn) == 2:
            lines_el.append((tuple(conn), phys, r.lineno))
        else:
            raise MeshParseError(f"unsupported element type {etype}", r.lineno, "Elements")
    if r.i != secs["Elements"][1]:
        raise MeshParseError(f"$Elements count {n} does not match the number of element lines",
                             r.lineno, "Elements")
    return nodes, tris, lines_el


def _parse_v4(reader, secs):
    phys_of = {}
    if "Entities" in secs:
        r = reader("Entities")
        counts = r.ints("Entities", 4)
        for dim, cnt in enumerate(counts[:4]):
            for _ in range(cnt):
                s = r.next("Entities").split()
                tag = int(s[0])
                off = 4 if dim == 0 else 7
                nphys = int(s[off])
                phys = [int(t) for t in s[off + 1:off + 1 + nphys]]
                phys_of[(dim, tag)] = phys[0] if phys else None

    r = reader("Nodes")
    head = r.ints("Nodes", 4)
    nblocks, nnodes = head[0], head[1]
    nodes = {}
    for _ in range(nblocks):
        blk = r.ints("Nodes", 4)
        if blk[2] != 0:
            raise MeshParseError("parametric nodes are not supported", r.lineno, "Nodes")
        m = blk[3]
        tags = [r.ints("Nodes", 1)[0] for _ in range(m)]
        for t in tags:
            s = r.next("Nodes").split()
            nodes[t] = (float(s[0]), float(s[1]))
    if len(nodes) != nnodes or r.i != secs["Nodes"][1]:
        raise MeshParseError(f"$Nodes declares {nnodes} nodes, found {len(nodes)}",
                             r.lineno, "Nodes")

    r = reader("Elements")
    head = r.ints("Elements", 4)
    nblocks, nel = head[0], head[1]
    tris, lines_el = [], []
    seen = 0
    for _ in range(nblocks):
        dim, etag, etype, m = r.ints("Elements", 4)
        phys = phys_of.get((dim, etag))
        for _ in range(m):
            vals = r.ints("Elements", 2)
            conn = vals[1:]
            seen += 1
            if etype == 2 and len(conn) == 3:
                tris.append((conn, phys))
            elif etype == 1 and len(conn) == 2:
                lines_el.append((tuple(conn), phys, r.lineno))
            else:
                raise MeshParseError(f"unsupported element type {etype}", r.lineno, "Elements")
    if seen != nel or r.i != secs["Elements"][1]:
        raise MeshParseError(f"$Elements declares {nel} elements, found {seen}", r.lineno,
                             "Elements")
    return nodes, tris, lines_el


def write_gmsh22(mesh: Mesh, path) -> None:
    """Write triangles plus tagged boundary lines as MSH 2.2 ASCII."""
    tags = sorted({t for t in mesh.boundary_tag if t is not None})
    phys = {t: i + 1 for i, t in enumerate(tags)}
    out = ["$MeshFormat", "2.2 0 8", "$EndMeshFormat"]
    if tags:
        out += ["$PhysicalNames", str(len(tags))]
        out += [f'1 {phys[t]} "{t}"' for t in tags]
        out += ["$EndPhysicalNames"]
    out += ["$Nodes", str(mesh.n_vertices)]
    out += [f"{i + 1} {x:.17g} {y:.17g} 0" for i, (x, y) in enumerate(mesh.vertices)]
    out += ["$EndNodes"]
    tagged = [f for f in range(mesh.n_facets) if mesh.boundary_tag[f] is not None]
    out += ["$Elements", str(len(tagged) + mesh.n_cells)]
    k = 1
    for f in tagged:
        a, b = mesh.facet_vertices[f] + 1
        p = phys[mesh.boundary_tag[f]]
        out.append(f"{k} 1 2 {p} {p} {a} {b}")
        k += 1
    for a, b, c in mesh.cells + 1:
        out.append(f"{k} 2 2 0 0 {a} {b} {c}")
        k += 1
    out += ["$EndElements"]
    Path(path).write_text("\n".join(out) + "\n")


def write_mesh_dump(mesh: Mesh, path) -> None:
    out = [f"VERTICES {mesh.n_vertices}"]
    out += [f"{x:.17g} {y:.17g}" for x, y in mesh.vertices]
    out.append(f"CELLS {mesh.n_cells}")
    out += [f"{a} {b} {c}" for a, b, c in mesh.cells]
    out.append(f"FACETS {mesh.n_facets}")
    for f in range(mesh.n_facets):
        a, b = mesh.facet_vertices[f]
        tag = mesh.boundary_tag[f]
        tag = "-" if tag is None else str(tag).replace(" ", "_")
        out.append(f"{a} {b} {STATUS_NAMES[int(mesh.status[f])]} {tag}")
    Path(path).write_text("\n".join(out) + "\n")


def read_mesh_dump(path) -> Mesh:
    lines = [s.strip() for s in Path(path).read_text().splitlines() if s.strip()]
    i = 0

    def header(name):
        nonlocal i
        parts = lines[i].split()
        if parts[0] != name:
            raise MeshParseError(f"expected {name} section", i + 1, name)
        i += 1
        return int(parts[1])

    nv = header("VERTICES")
    verts = np.array([[float(t) for t in lines[i + k].split()] for k in range(nv)])
    i += nv
    nc = header("CELLS")
    cells = np.array([[int(t) for t in lines[i + k].split()] for k in range(nc)], dtype=np.int64)
    i += nc
    nf = header("FACETS")
    mesh = build_mesh(verts, cells)
    lookup = {tuple(sorted(map(int, fv))): f for f, fv in enumerate(mesh.facet_vertices)}
    for k in range(nf):
        a, b, status, tag = lines[i + k].split()
        f = lookup[tuple(sorted((int(a), int(b))))]
        mesh.status[f] = _STATUS_CODES[status]
        mesh.boundary_tag[f] = None if tag == "-" else tag
    return mesh
