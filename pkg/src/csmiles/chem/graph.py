"""Molecular graph built from a token sequence."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

from csmiles.chem.tokenizer import AtomDescriptor, Token, TokenKind, ring_number, tokenize
from csmiles.exceptions import DanglingBond, ParseError, UnbalancedBranch, UnmatchedRingClosure


class BondOrder(enum.Enum):
    SINGLE = 1
    DOUBLE = 2
    TRIPLE = 3
    AROMATIC = 4

    @property
    def valence(self) -> int:
        """Contribution to atom valence; aromatic bonds count 1 (slack handled elsewhere)."""
        return 1 if self is BondOrder.AROMATIC else self.value


_BOND_SYMBOL = {
    "-": BondOrder.SINGLE,
    "/": BondOrder.SINGLE,
    "\\": BondOrder.SINGLE,
    "=": BondOrder.DOUBLE,
    "#": BondOrder.TRIPLE,
    ":": BondOrder.AROMATIC,
}


@dataclass(frozen=True)
class Bond:
    i: int
    j: int
    order: BondOrder = BondOrder.SINGLE

    def other(self, k: int) -> int:
        return self.j if k == self.i else self.i


@dataclass(frozen=True)
class MolGraph:
    atoms: tuple[AtomDescriptor, ...]
    bonds: tuple[Bond, ...] = ()
    _adjacency: tuple[tuple[tuple[int, BondOrder], ...], ...] = field(
        init=False, repr=False, compare=False
    )

    def __post_init__(self) -> None:
        n = len(self.atoms)
        adj: list[list[tuple[int, BondOrder]]] = [[] for _ in range(n)]
        seen: set[tuple[int, int]] = set()
        for b in self.bonds:
            if not (0 <= b.i < n and 0 <= b.j < n) or b.i == b.j:
                raise ParseError(f"invalid bond endpoints ({b.i}, {b.j})")
            key = (min(b.i, b.j), max(b.i, b.j))
            if key in seen:
                raise ParseError(f"duplicate bond between atoms {key}")
            seen.add(key)
            adj[b.i].append((b.j, b.order))
            adj[b.j].append((b.i, b.order))
        object.__setattr__(self, "_adjacency", tuple(tuple(a) for a in adj))

    def __len__(self) -> int:
        return len(self.atoms)

    def neighbors(self, k: int) -> tuple[tuple[int, BondOrder], ...]:
        return self._adjacency[k]

    def degree(self, k: int) -> int:
        return len(self._adjacency[k])

    def bond_order(self, i: int, j: int) -> BondOrder | None:
        for other, order in self._adjacency[i]:
            if other == j:
                return order
        return None

    def components(self) -> list[list[int]]:
        """Connected components, each sorted, ordered by smallest atom index."""
        seen = [False] * len(self.atoms)
        out: list[list[int]] = []
        for start in range(len(self.atoms)):
            if seen[start]:
                continue
            stack, comp = [start], []
            seen[start] = True
            while stack:
                k = stack.pop()
                comp.append(k)
                for nb, _ in self._adjacency[k]:
                    if not seen[nb]:
                        seen[nb] = True
                        stack.append(nb)
            out.append(sorted(comp))
        return out

    def subgraph(self, indices: Sequence[int]) -> MolGraph:
        """Induced subgraph; atoms renumbered in the given order."""
        remap = {old: new for new, old in enumerate(indices)}
        bonds = tuple(
            Bond(remap[b.i], remap[b.j], b.order)
            for b in self.bonds
            if b.i in remap and b.j in remap
        )
        return MolGraph(tuple(self.atoms[k] for k in indices), bonds)

    def permuted(self, perm: Sequence[int]) -> MolGraph:
        """Graph with atom ``k`` moved to position ``perm[k]``."""
        atoms: list[AtomDescriptor | None] = [None] * len(self.atoms)
        for old, new in enumerate(perm):
            atoms[new] = self.atoms[old]
        bonds = tuple(Bond(perm[b.i], perm[b.j], b.order) for b in self.bonds)
        return MolGraph(tuple(atoms), bonds)  # type: ignore[arg-type]

    def with_atoms(self, atoms: Iterable[AtomDescriptor]) -> MolGraph:
        return MolGraph(tuple(atoms), self.bonds)


def parse(tokens: Sequence[Token] | str) -> MolGraph:
    """Build a :class:`MolGraph` from tokens (or directly from a SMILES string).

    Atoms are numbered in token order.  An unmarked bond between two aromatic
    atoms is aromatic, otherwise single.
    """
    if isinstance(tokens, str):
        tokens = tokenize(tokens)
    atoms: list[AtomDescriptor] = []
    bonds: dict[tuple[int, int], Bond] = {}
    branch_stack: list[int] = []
    open_rings: dict[int, tuple[int, BondOrder | None]] = {}
    prev: int | None = None
    pending_bond: BondOrder | None = None

    def add_bond(a: int, b: int, order: BondOrder | None) -> None:
        if order is None:
            both_aromatic = atoms[a].aromatic and atoms[b].aromatic
            order = BondOrder.AROMATIC if both_aromatic else BondOrder.SINGLE
        key = (min(a, b), max(a, b))
        if a == b or key in bonds:
            raise UnmatchedRingClosure(f"ring closure creates invalid bond {key}")
        bonds[key] = Bond(a, b, order)

    for tok in tokens:
        kind = tok.kind
        if kind is TokenKind.ATOM:
            assert tok.atom is not None
            atoms.append(tok.atom)
            idx = len(atoms) - 1
            if prev is not None:
                add_bond(prev, idx, pending_bond)
            elif pending_bond is not None:
                raise DanglingBond(f"bond before first atom at token {tok.position}")
            pending_bond = None
            prev = idx
        elif kind is TokenKind.BOND:
            if prev is None or pending_bond is not None:
                raise DanglingBond(f"unexpected bond {tok.text!r} at token {tok.position}")
            pending_bond = _BOND_SYMBOL[tok.text]
        elif kind is TokenKind.RING_CLOSURE:
            if prev is None:
                raise UnmatchedRingClosure(f"ring closure {tok.text!r} before any atom")
            num = ring_number(tok)
            if num in open_rings:
                partner, order = open_rings.pop(num)
                if order is not None and pending_bond is not None and order is not pending_bond:
                    raise UnmatchedRingClosure(f"conflicting bond orders on ring {num}")
                add_bond(partner, prev, order or pending_bond)
            else:
                open_rings[num] = (prev, pending_bond)
            pending_bond = None
        elif kind is TokenKind.BRANCH_OPEN:
            if prev is None or pending_bond is not None:
                raise UnbalancedBranch(f"branch opened without an atom at token {tok.position}")
            branch_stack.append(prev)
        elif kind is TokenKind.BRANCH_CLOSE:
            if not branch_stack:
                raise UnbalancedBranch(f"unmatched ')' at token {tok.position}")
            if pending_bond is not None:
                raise DanglingBond(f"bond with no following atom at token {tok.position}")
            prev = branch_stack.pop()
        elif kind is TokenKind.DOT:
            if pending_bond is not None:
                raise DanglingBond("bond followed by '.'")
            if branch_stack:
                raise UnbalancedBranch("'.' inside an open branch")
            prev = None
    if pending_bond is not None:
        raise DanglingBond("SMILES ends with a bond")
    if branch_stack:
        raise UnbalancedBranch(f"{len(branch_stack)} unclosed branch(es)")
    if open_rings:
        raise UnmatchedRingClosure(f"unclosed ring bond(s) {sorted(open_rings)}")
    return MolGraph(tuple(atoms), tuple(bonds.values()))


def parse_smiles(smiles: str) -> MolGraph:
    return parse(tokenize(smiles))


def strip_atom_maps(graph: MolGraph) -> MolGraph:
    """Copy of ``graph`` with every atom-map label cleared."""
    if all(a.atom_map is None for a in graph.atoms):
        return graph
    return graph.with_atoms(a.without_map() for a in graph.atoms)


def relabel(graph: MolGraph, index: int, **changes) -> MolGraph:
    atoms = list(graph.atoms)
    atoms[index] = replace(atoms[index], **changes)
    return graph.with_atoms(atoms)
