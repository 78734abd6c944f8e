"""Exception types raised across the pipeline."""


class PulsebenchError(Exception):
    """Base class for all pulsebench errors."""


# --- ingestion ---

class MissingPath(PulsebenchError):
    pass


class CorruptFrame(PulsebenchError):
    def __init__(self, index, message=""):
        self.index = index
        super().__init__(f"corrupt frame {index}: {message}" if message
                         else f"corrupt frame {index}")


class LabelParseError(PulsebenchError):
    def __init__(self, line, message=""):
        self.line = line
        super().__init__(f"label parse error at line {line}: {message}" if message
                         else f"label parse error at line {line}")


class RateMismatch(PulsebenchError):
    pass


class InsufficientCoverage(PulsebenchError):
    pass


class EmptyRoi(PulsebenchError):
    pass


class RoiOutOfBounds(PulsebenchError):
    pass


class TooShort(PulsebenchError):
    pass


# --- binary cache ---

class BadMagic(PulsebenchError):
    pass


class VersionMismatch(PulsebenchError):
    pass


class TruncatedFile(PulsebenchError):
    pass


# --- recovery methods ---

class DegenerateInput(PulsebenchError):
    pass


class WindowTooLong(PulsebenchError):
    pass


class ConvergenceFailure(PulsebenchError):
    pass


class RankDeficient(PulsebenchError):
    pass


# --- dsp ---

class InvalidBand(PulsebenchError):
    pass


class EmptyBand(PulsebenchError):
    pass


# --- config / reports ---

class ConfigInvalid(PulsebenchError):
    pass


class ParseError(PulsebenchError):
    def __init__(self, line, message=""):
        self.line = line
        super().__init__(f"parse error at line {line}: {message}" if message
                         else f"parse error at line {line}")
