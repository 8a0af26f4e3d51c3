from __future__ import annotations

from dataclasses import dataclass

from .lattice import BoxGeometry


@dataclass(frozen=True)
class LatticePath:
    """Vertex/edge sequence on the primal or dual lattice.

    Dual vertices carry their true half-integer coordinates; ``edges`` always
    holds primal edge ids (for a dual path, the primal edges it crosses).
    """

    vertices: tuple[tuple[float, float], ...]
    edges: tuple[int, ...]
    lattice: str = "primal"

    def __len__(self) -> int:
        return len(self.edges)

    @property
    def length(self) -> int:
        return len(self.edges)

    @property
    def is_closed(self) -> bool:
        return len(self.vertices) > 1 and self.vertices[0] == self.vertices[-1]

    @property
    def is_self_avoiding(self) -> bool:
        vs = self.vertices[:-1] if self.is_closed else self.vertices
        return len(set(vs)) == len(vs)

    def check(self, geom: BoxGeometry) -> None:
        """Raise ValueError unless consecutive vertices are unit steps matching ``edges``."""
        if len(self.edges) != len(self.vertices) - 1:
            raise ValueError("edge count must be vertex count minus one")
        for (a, b, e) in zip(self.vertices[:-1], self.vertices[1:], self.edges):
            if abs(a[0] - b[0]) + abs(a[1] - b[1]) != 1:
                raise ValueError(f"non-unit step {a} -> {b}")
            if self.lattice == "primal":
                want = geom.edge_between((int(a[0]), int(a[1])), (int(b[0]), int(b[1])))
            else:
                want = crossed_edge(geom, a, b)
            if want != e:
                raise ValueError(f"edge id {e} does not match step {a} -> {b}")

    def is_open(self, states) -> bool:
        return all(states[e] == 1 for e in self.edges)

    def is_closed_dual(self, states) -> bool:
        return all(states[e] == 0 for e in self.edges)


def crossed_edge(geom: BoxGeometry, a, b) -> int:
    """Primal edge crossed by the dual step a -> b (true coordinates)."""
    from .lattice import HORIZONTAL, VERTICAL
    import math

    ax, ay = a
    bx, by = b
    if ax == bx:
        return geom.encode(int(math.floor(ax)), int(math.floor(max(ay, by))), HORIZONTAL)
    return geom.encode(int(math.floor(max(ax, bx))), int(math.floor(ay)), VERTICAL)


def primal_path(geom: BoxGeometry, vids) -> LatticePath:
    verts = tuple(geom.vertex(v) for v in vids)
    edges = tuple(geom.edge_between(a, b) for a, b in zip(verts[:-1], verts[1:]))
    return LatticePath(verts, edges, "primal")


def dual_path(geom: BoxGeometry, dids) -> LatticePath:
    verts = []
    for d in dids:
        x, y = geom.dual_vertex(d)
        verts.append((x + 0.5, y + 0.5))
    verts = tuple(verts)
    edges = tuple(crossed_edge(geom, a, b) for a, b in zip(verts[:-1], verts[1:]))
    return LatticePath(verts, edges, "dual")
