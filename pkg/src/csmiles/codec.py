"""Conversion between SMILES and C-SMILES, plus vocabulary construction.

C-SMILES replaces each atom by an uppercase element token followed by
single-character property tokens:

====  ===============================
``&`` aromatic (lowercase) atom
``@`` one per chirality mark
``H`` one per attached hydrogen
``+`` one per unit of positive charge
``$`` one per unit of negative charge
====  ===============================

A hydrogen *atom* (``[H]``) becomes the element token ``Hy`` so that it
cannot be confused with the hydrogen-count modifier.  An isotope is a single
zero-padded number token (``[2H]`` -> ``02 Hy``) placed before the element,
which keeps it distinct from one-digit ring-closure tokens.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Sequence

from csmiles.chem.elements import AROMATIC_ELEMENTS, PERIODIC_SYMBOLS
from csmiles.chem.tokenizer import AtomDescriptor, Chirality, TokenKind, tokenize
from csmiles.exceptions import (
    DanglingModifier,
    EmptyCorpus,
    MalformedSequence,
    SmilesError,
)

AROMATIC = "&"
POSITIVE = "+"
NEGATIVE = "$"
HYDROGEN = "H"
CHIRAL = "@"
SPECIAL_TOKENS = (AROMATIC, POSITIVE, NEGATIVE, HYDROGEN, CHIRAL)
HYDROGEN_ATOM = "Hy"

PAD, SOS, EOS, UNK = "<pad>", "<sos>", "<eos>", "<unk>"
SENTINELS = (PAD, SOS, EOS, UNK)

_STRUCTURAL_SINGLE = frozenset("-=#:/\\().0123456789")


def is_element_token(tok: str) -> bool:
    return tok == HYDROGEN_ATOM or (tok != HYDROGEN and tok in PERIODIC_SYMBOLS)


def is_isotope_token(tok: str) -> bool:
    return len(tok) >= 2 and tok.isdigit()


def is_structural_token(tok: str) -> bool:
    return tok in _STRUCTURAL_SINGLE or (len(tok) == 3 and tok[0] == "%" and tok[1:].isdigit())


@dataclass
class CSmilesSequence:
    tokens: list[str]
    # For each C-SMILES token, index of the SMILES token it came from.
    source_span: list[int] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.tokens)

    def __str__(self) -> str:
        return " ".join(self.tokens)


def encode_atom(atom: AtomDescriptor) -> list[str]:
    """Decompose one atom into C-SMILES tokens.

    >>> encode_atom(AtomDescriptor("S", aromatic=True, charge=1, bracket=True))
    ['S', '&', '+']
    """
    out = []
    if atom.isotope is not None:
        out.append(f"{atom.isotope:02d}")
    out.append(HYDROGEN_ATOM if atom.element == "H" else atom.element)
    if atom.aromatic:
        out.append(AROMATIC)
    out.extend(CHIRAL * len(atom.chirality.value))
    out.extend(HYDROGEN * atom.explicit_h)
    if atom.charge > 0:
        out.extend(POSITIVE * atom.charge)
    elif atom.charge < 0:
        out.extend(NEGATIVE * -atom.charge)
    return out


def encode(smiles: str) -> CSmilesSequence:
    """SMILES string -> C-SMILES sequence (atom maps are dropped)."""
    tokens: list[str] = []
    span: list[int] = []
    for tok in tokenize(smiles):
        if tok.kind is TokenKind.ATOM:
            assert tok.atom is not None
            pieces = encode_atom(tok.atom)
        else:
            pieces = [tok.text]
        tokens.extend(pieces)
        span.extend([tok.position] * len(pieces))
    return CSmilesSequence(tokens, span)


# modifier stage order inside one atom run
_STAGE = {AROMATIC: 1, CHIRAL: 2, HYDROGEN: 3, POSITIVE: 4, NEGATIVE: 4}


def _decode_atom(tokens: Sequence[str], start: int) -> tuple[AtomDescriptor, int]:
    i = start
    isotope = None
    if is_isotope_token(tokens[i]):
        isotope = int(tokens[i])
        i += 1
        if i >= len(tokens) or not is_element_token(tokens[i]):
            raise MalformedSequence(f"isotope {tokens[i - 1]!r} not followed by an element")
    element = "H" if tokens[i] == HYDROGEN_ATOM else tokens[i]
    i += 1
    aromatic, chiral, hcount, charge = False, 0, 0, 0
    stage = 0
    while i < len(tokens) and tokens[i] in _STAGE:
        tok = tokens[i]
        s = _STAGE[tok]
        if s < stage or (s == stage and tok == AROMATIC):
            raise MalformedSequence(f"modifier {tok!r} out of order at {i}")
        if s == 4 and stage == 4 and (charge > 0) != (tok == POSITIVE):
            raise MalformedSequence(f"mixed charge signs at {i}")
        stage = s
        if tok == AROMATIC:
            aromatic = True
        elif tok == CHIRAL:
            chiral += 1
            if chiral > 2:
                raise MalformedSequence(f"more than two chirality marks at {i}")
        elif tok == HYDROGEN:
            hcount += 1
        else:
            charge += 1 if tok == POSITIVE else -1
        i += 1
    if aromatic and element not in AROMATIC_ELEMENTS:
        raise MalformedSequence(f"element {element} cannot be aromatic")
    atom = AtomDescriptor(
        element=element,
        aromatic=aromatic,
        charge=charge,
        explicit_h=hcount,
        chirality=Chirality("@" * chiral),
        isotope=isotope,
        bracket=False,
    )
    return atom, i


def decode_atoms(tokens: Sequence[str]) -> Iterator[tuple[str, AtomDescriptor | None]]:
    """Group C-SMILES tokens into (SMILES text, atom or None) pieces."""
    i = 0
    while i < len(tokens):
        tok = tokens[i]
        if is_element_token(tok) or is_isotope_token(tok):
            atom, i = _decode_atom(tokens, i)
            yield atom.to_smiles(), atom
        elif tok in _STAGE:
            raise DanglingModifier(f"modifier {tok!r} at {i} has no preceding element")
        elif is_structural_token(tok):
            yield tok, None
            i += 1
        else:
            raise MalformedSequence(f"unknown token {tok!r} at {i}")


def decode(seq: CSmilesSequence | Sequence[str] | str) -> str:
    """C-SMILES -> SMILES.

    Accepts a :class:`CSmilesSequence`, a token list or a space-separated
    string.  Atoms get brackets back only when they carry hydrogens, charge,
    chirality or an isotope, or when the element needs them anyway.
    """
    if isinstance(seq, CSmilesSequence):
        tokens: Sequence[str] = seq.tokens
    elif isinstance(seq, str):
        tokens = seq.split()
    else:
        tokens = seq
    try:
        return "".join(text for text, _ in decode_atoms(tokens))
    except SmilesError as exc:
        raise MalformedSequence(str(exc)) from exc


def raw_tokens(smiles: str) -> list[str]:
    return [t.text for t in tokenize(smiles)]


class Vocabulary:
    """Dense token <-> id mapping with the sentinels at ids 0..3."""

    def __init__(self, tokens: Iterable[str], counts: Counter | None = None):
        self.tokens: list[str] = list(SENTINELS)
        for tok in tokens:
            if tok not in SENTINELS and tok not in self.tokens:
                self.tokens.append(tok)
        self.index = {tok: i for i, tok in enumerate(self.tokens)}
        self.counts = counts or Counter()

    pad_id, sos_id, eos_id, unk_id = 0, 1, 2, 3

    def __len__(self) -> int:
        return len(self.tokens)

    def __contains__(self, tok: str) -> bool:
        return tok in self.index

    def ids(self, tokens: Iterable[str]) -> list[int]:
        return [self.index.get(t, self.unk_id) for t in tokens]

    def lookup(self, ids: Iterable[int]) -> list[str]:
        return [self.tokens[i] for i in ids]

    def add(self, tok: str) -> int:
        if tok not in self.index:
            self.index[tok] = len(self.tokens)
            self.tokens.append(tok)
        return self.index[tok]


def build_vocab(corpus: Iterable[Sequence[str]], extra: Iterable[str] = ()) -> Vocabulary:
    """Count tokens over a corpus of token sequences.

    Tokens are ordered by descending frequency, ties alphabetically, after
    the sentinels.
    """
    counts: Counter = Counter()
    n = 0
    for seq in corpus:
        counts.update(seq)
        n += 1
    if n == 0:
        raise EmptyCorpus("cannot build a vocabulary from an empty corpus")
    ordered = sorted(counts, key=lambda t: (-counts[t], t))
    return Vocabulary([*ordered, *extra], counts)
