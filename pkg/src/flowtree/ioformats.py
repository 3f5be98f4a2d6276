"""File ingestion: whitespace edge lists and DIMACS max-flow files."""

from __future__ import annotations

from pathlib import Path

from .graph import Graph, GraphError, build_graph


class ParseError(GraphError):
    def __init__(self, line_no: int, message: str):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


def parse_edge_list_text(text: str) -> Graph:
    """Edge-list format: header ``n m`` then one ``u v capacity`` per line."""
    n = m = None
    edges: list[tuple[int, int, float]] = []
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if n is None:
            if len(parts) != 2:
                raise ParseError(line_no, "expected header 'n m'")
            n, m = int(parts[0]), int(parts[1])
            continue
        if len(parts) != 3:
            raise ParseError(line_no, "expected 'u v capacity'")
        if len(edges) >= m:
            raise ParseError(line_no, "more edges than the header declared "
                                      "(duplicate header?)")
        try:
            edges.append((int(parts[0]), int(parts[1]), float(parts[2])))
        except ValueError as exc:
            raise ParseError(line_no, str(exc)) from None
    if n is None:
        raise ParseError(1, "empty input")
    if len(edges) != m:
        raise ParseError(line_no if text else 1,
                         f"expected {m} edges, found {len(edges)}")
    try:
        return build_graph(edges, n)
    except GraphError as exc:
        raise GraphError(f"invalid edge list: {exc}") from None


def parse_dimacs_text(text: str):
    """DIMACS max-flow format; returns (Graph, s, t).

    Vertices are 1-indexed in the file and shifted to 0-indexed here.  Arcs
    are treated as undirected capacitated edges; duplicate (u, v) arcs stay
    as parallel edges.
    """
    n = m = None
    s = t = None
    edges: list[tuple[int, int, float]] = []
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("c"):
            continue
        parts = line.split()
        tag = parts[0]
        if tag == "p":
            if n is not None:
                raise ParseError(line_no, "duplicate problem line")
            if len(parts) != 4 or parts[1] not in ("max", "maxflow"):
                raise ParseError(line_no, "expected 'p max N M'")
            n, m = int(parts[2]), int(parts[3])
        elif tag == "n":
            if len(parts) != 3 or parts[2] not in ("s", "t"):
                raise ParseError(line_no, "expected 'n ID s|t'")
            if parts[2] == "s":
                s = int(parts[1]) - 1
            else:
                t = int(parts[1]) - 1
        elif tag == "a":
            if len(parts) != 4:
                raise ParseError(line_no, "expected 'a U V CAP'")
            u, v, c = int(parts[1]) - 1, int(parts[2]) - 1, float(parts[3])
            if u == v:
                continue  # self-arcs are meaningless for undirected flow
            edges.append((u, v, c))
        else:
            raise ParseError(line_no, f"unknown record type {tag!r}")
    if n is None:
        raise ParseError(1, "missing problem line")
    if s is None or t is None:
        raise ParseError(1, "missing source or sink designation")
    return build_graph(edges, n), s, t


def parse_input(path, fmt: str = "auto"):
    """Load a graph file; returns (Graph, s or None, t or None).

    ``fmt`` is ``dimacs``, ``edgelist``, or ``auto`` (sniffed from the first
    non-comment character).
    """
    text = Path(path).read_text()
    if fmt == "auto":
        fmt = "dimacs" if _looks_like_dimacs(text) else "edgelist"
    if fmt == "dimacs":
        g, s, t = parse_dimacs_text(text)
        return g, s, t
    if fmt == "edgelist":
        return parse_edge_list_text(text), None, None
    raise ValueError(f"unknown format {fmt!r}")


def _looks_like_dimacs(text: str) -> bool:
    for raw in text.splitlines():
        line = raw.strip()
        if not line:
            continue
        return line[0] in "cpna"
    return False
