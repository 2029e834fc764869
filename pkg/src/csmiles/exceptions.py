"""Exception hierarchy shared by every csmiles module."""

from __future__ import annotations


class CSmilesError(Exception):
    """Base class for all library errors."""


class SmilesError(CSmilesError, ValueError):
    """A SMILES string could not be tokenized, parsed or written."""


class TokenizeError(SmilesError):
    pass


class EmptyInput(TokenizeError):
    pass


class IllegalCharacter(TokenizeError):
    pass


class UnterminatedBracket(TokenizeError):
    pass


class InvalidBracketAtom(TokenizeError):
    pass


class ParseError(SmilesError):
    pass


class UnbalancedBranch(ParseError):
    pass


class UnmatchedRingClosure(ParseError):
    pass


class DanglingBond(ParseError):
    pass


class InvalidRoot(SmilesError):
    pass


class CodecError(CSmilesError, ValueError):
    """A C-SMILES token sequence is not well formed."""


class DanglingModifier(CodecError):
    pass


class MalformedSequence(CodecError):
    pass


class EmptyCorpus(CSmilesError, ValueError):
    pass


class DuplicateAtomMap(CSmilesError, ValueError):
    pass


class ModelError(CSmilesError):
    pass


class SequenceTooLong(ModelError, ValueError):
    pass


class UnknownId(ModelError, ValueError):
    pass


class LengthMismatch(ModelError, ValueError):
    pass


class ShapeMismatch(ModelError, ValueError):
    pass


class EmptyDataset(ModelError, ValueError):
    pass


class DivergedLoss(ModelError, ArithmeticError):
    pass


class GradMismatch(ModelError, AssertionError):
    def __init__(self, parameter: str, rel_error: float):
        super().__init__(f"gradient mismatch on {parameter}: relative error {rel_error:.3e}")
        self.parameter = parameter
        self.rel_error = rel_error


class GoldParseError(CSmilesError, ValueError):
    pass


class AllLinesInvalid(CSmilesError, ValueError):
    pass
