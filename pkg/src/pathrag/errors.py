"""Exception hierarchy shared across the package."""


class PathRagError(Exception):
    """Base class for every error raised deliberately by pathrag."""


# imaging
class ImageNotFound(PathRagError, FileNotFoundError):
    pass


class UnsupportedFormat(PathRagError, ValueError):
    pass


class CorruptImage(PathRagError, ValueError):
    pass


# stain estimation
class StainEstimationError(PathRagError, ValueError):
    pass


class InsufficientTissue(StainEstimationError):
    pass


class DegenerateCovariance(StainEstimationError):
    pass


# patching
class ImageTooSmall(PathRagError, ValueError):
    pass


class OutOfBounds(PathRagError, ValueError):
    pass


# prompts
class EmptyQuestion(PathRagError, ValueError):
    pass


class EmptyCaption(PathRagError, ValueError):
    pass


# gateway
class BackendFailure(PathRagError):
    """Any failure talking to a model backend."""


class BackendUnreachable(BackendFailure):
    pass


class BackendTimeout(BackendFailure):
    pass


class BackendError(BackendFailure):
    def __init__(self, status: int, body: str):
        self.status = status
        self.body = body[:200]
        super().__init__(f"backend returned HTTP {status}: {self.body}")


class MalformedResponse(BackendFailure):
    pass


# datasets and evaluation
class DatasetError(PathRagError, ValueError):
    pass


class MissingField(DatasetError):
    def __init__(self, line: int, field: str):
        self.line = line
        self.field = field
        super().__init__(f"line {line}: missing or empty field {field!r}")


class DuplicateId(DatasetError):
    def __init__(self, sample_id: str):
        self.sample_id = sample_id
        super().__init__(f"duplicate id {sample_id!r}")


class MalformedJson(DatasetError):
    def __init__(self, line: int, detail: str = ""):
        self.line = line
        super().__init__(f"line {line}: malformed JSON {detail}".rstrip())


class EmptyGold(PathRagError, ValueError):
    pass


class LengthMismatch(PathRagError, ValueError):
    pass


class TooFewSamples(PathRagError, ValueError):
    pass


# QA generation parsing
class QaParseError(PathRagError, ValueError):
    pass


class WrongCount(QaParseError):
    def __init__(self, found: int):
        self.found = found
        super().__init__(f"expected 5 question/answer pairs, found {found}")


class UnpairedMarker(QaParseError):
    pass


class InvalidQuestionStem(QaParseError):
    def __init__(self, ordinal: int):
        self.ordinal = ordinal
        super().__init__(f"question {ordinal} does not start with 'What' or 'Where'")


class ConfigError(PathRagError, ValueError):
    pass
