"""Canonical SMILES by label refinement and exhaustive tie breaking."""

from __future__ import annotations

from typing import Iterator

from csmiles.chem.graph import MolGraph, parse_smiles, strip_atom_maps
from csmiles.chem.valence import simplify_brackets
from csmiles.chem.writer import write_smiles


def _atom_invariant(graph: MolGraph, k: int) -> tuple:
    a = graph.atoms[k]
    return (
        graph.degree(k),
        a.element,
        a.aromatic,
        a.charge,
        a.explicit_h,
        a.isotope or 0,
        a.chirality.value,
        a.atom_map or 0,
        a.bracket,
    )


def _renumber(keys: list) -> list[int]:
    order = {key: i for i, key in enumerate(sorted(set(keys)))}
    return [order[key] for key in keys]


def refine(graph: MolGraph, classes: list[int]) -> list[int]:
    """Split classes by neighbour signatures until the partition is stable.

    The previous class is the leading sort key, so refinement only splits
    cells and never reorders them.
    """
    n_cells = len(set(classes))
    while True:
        keys = [
            (classes[k], tuple(sorted((classes[nb], o.value) for nb, o in graph.neighbors(k))))
            for k in range(len(graph.atoms))
        ]
        classes = _renumber(keys)
        cells = len(set(classes))
        if cells == n_cells:
            return classes
        n_cells = cells


def _leaves(graph: MolGraph, classes: list[int]) -> Iterator[list[int]]:
    classes = refine(graph, classes)
    n = len(classes)
    if len(set(classes)) == n:
        yield classes
        return
    counts: dict[int, int] = {}
    for c in classes:
        counts[c] = counts.get(c, 0) + 1
    target = min(c for c, m in counts.items() if m > 1)
    # Atoms of one cell with identical neighbourhoods are interchangeable by an
    # automorphism, so only one of them needs to be tried.
    tried: set[frozenset] = set()
    for chosen in (k for k in range(n) if classes[k] == target):
        hood = frozenset(graph.neighbors(chosen))
        if hood in tried:
            continue
        tried.add(hood)
        split = [
            (2 * c if c != target or k == chosen else 2 * c + 1) for k, c in enumerate(classes)
        ]
        yield from _leaves(graph, _renumber(split))


def _component_ranks(graph: MolGraph) -> tuple[str, list[int]]:
    if len(graph.atoms) == 1:
        return write_smiles(graph), [0]
    start = _renumber([_atom_invariant(graph, k) for k in range(len(graph.atoms))])
    best: tuple[str, list[int]] | None = None
    for ranks in _leaves(graph, start):
        s = write_smiles(graph, ranks.index(0), ranks)
        if best is None or s < best[0]:
            best = (s, ranks)
    assert best is not None
    return best


def canonical_ranks(graph: MolGraph) -> list[int]:
    """Atom ranks such that ``write_smiles(graph, ranks.index(0), ranks)``
    reproduces :func:`canonicalize`."""
    parts = []
    for comp in graph.components():
        text, local = _component_ranks(graph.subgraph(comp))
        parts.append((text, comp, local))
    parts.sort(key=lambda p: p[0])
    ranks = [0] * len(graph.atoms)
    offset = 0
    for _, comp, local in parts:
        for k, r in zip(comp, local):
            ranks[k] = offset + r
        offset += len(comp)
    return ranks


def canonicalize(graph: MolGraph) -> str:
    """Deterministic SMILES independent of atom and bond storage order.

    Disconnected fragments are written separately and joined by ``.`` in
    sorted order.
    """
    parts = [_component_ranks(graph.subgraph(comp))[0] for comp in graph.components()]
    return ".".join(sorted(parts))


def canonical_smiles(smiles: str, strip_maps: bool = True) -> str:
    """Parse, optionally drop atom maps and redundant brackets, canonicalize."""
    graph = parse_smiles(smiles)
    if strip_maps:
        graph = simplify_brackets(strip_atom_maps(graph))
    return canonicalize(graph)
