"""
Mol2Trans Error Types
Exception hierarchy shared by all modules; each class carries the CLI exit code
"""

from typing import Optional


class Mol2TransError(Exception):
    """Base class for all toolkit errors"""
    exit_code = 1


class MoleculeError(Mol2TransError, ValueError):
    """A molecule or fragment string could not be turned into a valid graph"""

    def __init__(self, message: str, offset: Optional[int] = None):
        self.offset = offset
        self.detail = message
        if offset is not None:
            message = f"{message} (at offset {offset})"
        super().__init__(message)


class SmilesSyntaxError(MoleculeError):
    """Malformed SMILES / SMIRKS text"""


class UnsupportedFeature(MoleculeError):
    """Valid SMILES outside the supported subset (stereo, isotopes, '.')"""


class ValenceError(MoleculeError):
    """An atom would carry more bonds than its valence allows"""


class ArityError(MoleculeError):
    """A fragment does not carry exactly one [*:1] attachment point"""


class TokenError(Mol2TransError, ValueError):
    """Text cannot be split into model tokens"""


class ShapeError(Mol2TransError, ValueError):
    """Token ids or sequence lengths outside the model configuration"""


class CheckpointError(Mol2TransError):
    """Unreadable, corrupt or incompatible checkpoint"""
    exit_code = 2


class EmptyResult(Mol2TransError):
    """A pipeline step produced no output"""
    exit_code = 3


class InsufficientData(Mol2TransError, ValueError):
    """Not enough records left to train or split"""
    exit_code = 4


class FragmentNotFound(Mol2TransError, ValueError):
    """The requested fragment is not removable from the source molecule"""
    exit_code = 5


class DecodeOverflow(Mol2TransError):
    """No beam hypothesis reached EOS within max_steps"""
    exit_code = 6


class GroupMismatch(Mol2TransError, ValueError):
    """A source's known-target count differs from its coverage group key"""


class FormatError(Mol2TransError, ValueError):
    """A line of an input file does not follow the declared format"""
    exit_code = 2

    def __init__(self, message: str, line_number: Optional[int] = None):
        self.line_number = line_number
        if line_number is not None:
            message = f"line {line_number}: {message}"
        super().__init__(message)


class UsageError(Mol2TransError, ValueError):
    """Invalid command-line flags or config file keys"""
    exit_code = 64
