"""Lossless SMILES tokenizer.

Every character of the input belongs to exactly one token, so joining the
token texts gives back the original string.  Bracket atoms are decoded into
an :class:`AtomDescriptor` at tokenization time.
"""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass, replace

from csmiles.chem.elements import AROMATIC_ELEMENTS, BARE_AROMATIC, ORGANIC_SUBSET, PERIODIC_SYMBOLS
from csmiles.exceptions import (
    EmptyInput,
    IllegalCharacter,
    InvalidBracketAtom,
    UnterminatedBracket,
)


class TokenKind(enum.Enum):
    ATOM = "atom"
    BOND = "bond"
    RING_CLOSURE = "ring"
    BRANCH_OPEN = "open"
    BRANCH_CLOSE = "close"
    DOT = "dot"


class Chirality(enum.Enum):
    NONE = ""
    ANTICLOCKWISE = "@"
    CLOCKWISE = "@@"


@dataclass(frozen=True)
class AtomDescriptor:
    """Labels of a single atom.

    ``bracket`` records whether the atom was written inside ``[...]``.  For
    bracket atoms ``explicit_h`` is the stated hydrogen count; for bare
    organic-subset atoms it is 0 and hydrogens are implicit.
    """

    element: str
    aromatic: bool = False
    charge: int = 0
    explicit_h: int = 0
    chirality: Chirality = Chirality.NONE
    isotope: int | None = None
    atom_map: int | None = None
    bracket: bool = False

    def __post_init__(self) -> None:
        if self.element not in PERIODIC_SYMBOLS:
            raise InvalidBracketAtom(f"unknown element {self.element!r}")
        if self.aromatic and self.element not in AROMATIC_ELEMENTS:
            raise InvalidBracketAtom(f"element {self.element} cannot be aromatic")
        if self.explicit_h < 0:
            raise InvalidBracketAtom("negative hydrogen count")

    @property
    def symbol(self) -> str:
        """Element symbol as it is spelled in SMILES (lowercase if aromatic)."""
        return self.element.lower() if self.aromatic else self.element

    def needs_brackets(self) -> bool:
        return (
            self.bracket
            or self.element not in ORGANIC_SUBSET
            or (self.aromatic and self.symbol not in BARE_AROMATIC)
            or self.charge != 0
            or self.explicit_h != 0
            or self.chirality is not Chirality.NONE
            or self.isotope is not None
            or self.atom_map is not None
        )

    def to_smiles(self) -> str:
        if not self.needs_brackets():
            return self.symbol
        parts = ["["]
        if self.isotope is not None:
            parts.append(str(self.isotope))
        parts.append(self.symbol)
        parts.append(self.chirality.value)
        if self.explicit_h:
            parts.append("H" if self.explicit_h == 1 else f"H{self.explicit_h}")
        if self.charge:
            sign = "+" if self.charge > 0 else "-"
            parts.append(sign if abs(self.charge) == 1 else f"{sign}{abs(self.charge)}")
        if self.atom_map is not None:
            parts.append(f":{self.atom_map}")
        parts.append("]")
        return "".join(parts)

    def without_map(self) -> AtomDescriptor:
        return self if self.atom_map is None else replace(self, atom_map=None)


@dataclass(frozen=True)
class Token:
    kind: TokenKind
    text: str
    position: int
    atom: AtomDescriptor | None = None


BOND_CHARS = frozenset("-=#:/\\")

_BRACKET_RE = re.compile(
    r"""
    (?P<isotope>\d+)?
    (?P<symbol>[A-Z][a-z]?|se|as|[bcnops])
    (?P<chiral>@@|@)?
    (?P<hcount>H\d*)?
    (?P<charge>\++|-+|[+-]\d+)?
    (?::(?P<map>\d+))?
    """,
    re.VERBOSE,
)


def parse_bracket_atom(body: str) -> AtomDescriptor:
    """Decode the text between ``[`` and ``]``."""
    m = _BRACKET_RE.fullmatch(body)
    if m is None:
        raise InvalidBracketAtom(f"cannot parse bracket atom [{body}]")
    symbol = m["symbol"]
    if symbol[0].isupper() and symbol not in PERIODIC_SYMBOLS:
        raise InvalidBracketAtom(f"unknown element in [{body}]")
    aromatic = symbol[0].islower()
    element = symbol.capitalize()
    hcount = m["hcount"]
    explicit_h = 0 if hcount is None else (int(hcount[1:]) if len(hcount) > 1 else 1)
    charge_text = m["charge"]
    charge = 0
    if charge_text:
        sign = 1 if charge_text[0] == "+" else -1
        charge = sign * (int(charge_text[1:]) if charge_text[1:].isdigit() else len(charge_text))
    chirality = Chirality(m["chiral"] or "")
    isotope = int(m["isotope"]) if m["isotope"] else None
    if isotope == 0:
        raise InvalidBracketAtom(f"isotope must be positive in [{body}]")
    atom_map = int(m["map"]) if m["map"] is not None else None
    if atom_map == 0:
        atom_map = None
    return AtomDescriptor(
        element=element,
        aromatic=aromatic,
        charge=charge,
        explicit_h=explicit_h,
        chirality=chirality,
        isotope=isotope,
        atom_map=atom_map,
        bracket=True,
    )


def tokenize(smiles: str) -> list[Token]:
    """Split a SMILES string into tokens.

    >>> [t.text for t in tokenize("C[C@@H](Cl)c1ccccc1")]
    ['C', '[C@@H]', '(', 'Cl', ')', 'c', '1', 'c', 'c', 'c', 'c', 'c', '1']
    """
    if not smiles:
        raise EmptyInput("empty SMILES string")
    tokens: list[Token] = []
    i, n = 0, len(smiles)

    def emit(kind: TokenKind, text: str, atom: AtomDescriptor | None = None) -> None:
        tokens.append(Token(kind, text, len(tokens), atom))

    while i < n:
        ch = smiles[i]
        if ch == "[":
            end = smiles.find("]", i + 1)
            if end < 0:
                raise UnterminatedBracket(f"no closing ']' for bracket opened at {i}")
            text = smiles[i : end + 1]
            emit(TokenKind.ATOM, text, parse_bracket_atom(text[1:-1]))
            i = end + 1
        elif smiles.startswith(("Cl", "Br"), i):
            emit(TokenKind.ATOM, smiles[i : i + 2], AtomDescriptor(element=smiles[i : i + 2]))
            i += 2
        elif ch in ORGANIC_SUBSET:
            emit(TokenKind.ATOM, ch, AtomDescriptor(element=ch))
            i += 1
        elif ch in BARE_AROMATIC:
            emit(TokenKind.ATOM, ch, AtomDescriptor(element=ch.upper(), aromatic=True))
            i += 1
        elif ch in BOND_CHARS:
            emit(TokenKind.BOND, ch)
            i += 1
        elif ch.isdigit():
            emit(TokenKind.RING_CLOSURE, ch)
            i += 1
        elif ch == "%":
            digits = smiles[i + 1 : i + 3]
            if len(digits) != 2 or not digits.isdigit():
                raise IllegalCharacter(f"'%' at {i} must be followed by two digits")
            emit(TokenKind.RING_CLOSURE, smiles[i : i + 3])
            i += 3
        elif ch == "(":
            emit(TokenKind.BRANCH_OPEN, ch)
            i += 1
        elif ch == ")":
            emit(TokenKind.BRANCH_CLOSE, ch)
            i += 1
        elif ch == ".":
            emit(TokenKind.DOT, ch)
            i += 1
        else:
            raise IllegalCharacter(f"illegal character {ch!r} at position {i}")
    return tokens


def ring_number(token: Token) -> int:
    return int(token.text[1:]) if token.text.startswith("%") else int(token.text)
