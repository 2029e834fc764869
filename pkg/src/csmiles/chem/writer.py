"""Graph to SMILES writer with a caller-chosen root and neighbour order."""

from __future__ import annotations

from typing import Callable, Sequence

from csmiles.chem.graph import BondOrder, MolGraph
from csmiles.chem.tokenizer import AtomDescriptor
from csmiles.exceptions import InvalidRoot

# Items produced by the traversal: an int is an atom index, a str is literal text.
WriteItem = int | str


def bond_symbol(graph: MolGraph, a: int, b: int, order: BondOrder) -> str:
    both_aromatic = graph.atoms[a].aromatic and graph.atoms[b].aromatic
    if order is BondOrder.SINGLE:
        return "-" if both_aromatic else ""
    if order is BondOrder.AROMATIC:
        return "" if both_aromatic else ":"
    return "=" if order is BondOrder.DOUBLE else "#"


def _ring_label(n: int) -> str:
    return str(n) if n < 10 else f"%{n:02d}"


def _component_items(graph: MolGraph, root: int, rank: Sequence[int]) -> list[WriteItem]:
    # Pass 1: DFS to fix the spanning tree and ring-closure edges.
    order: dict[int, int] = {root: 0}
    parent = {root: -1}
    children: dict[int, list[int]] = {root: []}
    closures: dict[int, list[int]] = {}
    stack = [(root, iter(sorted(graph.neighbors(root), key=lambda nb: rank[nb[0]])))]
    while stack:
        a, it = stack[-1]
        for nb, _ in it:
            if nb == parent[a]:
                continue
            if nb not in order:
                order[nb] = len(order)
                parent[nb] = a
                children[a].append(nb)
                children[nb] = []
                stack.append((nb, iter(sorted(graph.neighbors(nb), key=lambda x: rank[x[0]]))))
                break
            if order[nb] < order[a] and a not in closures.get(nb, ()):
                closures.setdefault(nb, []).append(a)
                closures.setdefault(a, []).append(nb)
        else:
            stack.pop()

    # Pass 2: emit atoms, ring digits and branches.
    items: list[WriteItem] = []
    digit_of: dict[tuple[int, int], int] = {}
    in_use: set[int] = set()
    work: list[tuple[str, int, int]] = [("atom", root, -1)]
    while work:
        action, a, p = work.pop()
        if action == "open":
            items.append("(")
            continue
        if action == "close":
            items.append(")")
            continue
        if p >= 0:
            sym = bond_symbol(graph, p, a, graph.bond_order(p, a))  # type: ignore[arg-type]
            if sym:
                items.append(sym)
        items.append(a)
        partners = sorted(closures.get(a, ()), key=order.__getitem__)
        released = []
        for q in partners:
            if order[q] < order[a]:
                d = digit_of.pop((q, a))
                items.append(_ring_label(d))
                released.append(d)
        for q in partners:
            if order[q] > order[a]:
                d = 1
                while d in in_use:
                    d += 1
                in_use.add(d)
                digit_of[(a, q)] = d
                sym = bond_symbol(graph, a, q, graph.bond_order(a, q))  # type: ignore[arg-type]
                if sym:
                    items.append(sym)
                items.append(_ring_label(d))
        in_use.difference_update(released)
        kids = children[a]
        # Push in reverse so the first child is emitted first.
        if kids:
            work.append(("atom", kids[-1], a))
            for c in reversed(kids[:-1]):
                work.append(("close", -1, -1))
                work.append(("atom", c, a))
                work.append(("open", -1, -1))
    return items


def write_items(
    graph: MolGraph,
    root: int = 0,
    ranks: Sequence[int] | None = None,
) -> list[WriteItem]:
    """Traversal items for the whole graph.

    The component holding ``root`` is written first; every other component
    starts at its lowest-ranked atom.  Neighbours are visited in ascending
    ``ranks`` (atom index when omitted).
    """
    n = len(graph.atoms)
    if n == 0:
        return []
    if not 0 <= root < n:
        raise InvalidRoot(f"root {root} outside 0..{n - 1}")
    rank = list(range(n)) if ranks is None else list(ranks)
    comps = graph.components()
    first = next(c for c in comps if root in c)
    rest = sorted((c for c in comps if c is not first), key=lambda c: min(rank[k] for k in c))
    items: list[WriteItem] = []
    for comp in [first, *rest]:
        start = root if comp is first else min(comp, key=rank.__getitem__)
        if items:
            items.append(".")
        items.extend(_component_items(graph, start, rank))
    return items


def render(
    graph: MolGraph,
    items: Sequence[WriteItem],
    atom_text: Callable[[AtomDescriptor], str] = AtomDescriptor.to_smiles,
) -> str:
    return "".join(atom_text(graph.atoms[x]) if isinstance(x, int) else x for x in items)


def write_smiles(graph: MolGraph, root: int = 0, ranks: Sequence[int] | None = None) -> str:
    """Write ``graph`` as SMILES by depth-first search from ``root``.

    >>> from csmiles.chem.graph import parse_smiles
    >>> write_smiles(parse_smiles("CCO"), root=2)
    'OCC'
    """
    return render(graph, write_items(graph, root, ranks))
