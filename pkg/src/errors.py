"""Exception hierarchy shared by every pipeline stage.

ConfigError maps to exit code 1, DataError (and its subclasses) to exit code 2.
"""

from typing import Optional, Tuple


class PipelineError(Exception):
    """Base class for all pipeline failures"""


class ConfigError(PipelineError, ValueError):
    """Bad usage, bad configuration or a missing precondition file"""


class DataError(PipelineError):
    """The input data cannot support the requested operation"""


class DocumentError(DataError):
    """A single XML document could not be turned into a RawDocument"""

    def __init__(self, message: str, source: Optional[str] = None):
        self.source = source
        super().__init__(f"{source}: {message}" if source else message)


class MalformedXml(DocumentError):
    pass


class MissingBody(DocumentError):
    pass


class MissingPubYear(DocumentError):
    pass


class MissingIdentifier(DocumentError):
    pass


class EmptyVocabulary(DataError):
    pass


class NoNegativePool(DataError):
    pass


class EmptyCorpus(DataError):
    pass


class DimMismatch(DataError):
    pass


class EmptyIntersection(DataError):
    """No token is shared by two vocabularies; pair names the periods when known"""

    def __init__(self, pair: Optional[Tuple[int, int]] = None):
        self.pair = pair
        if pair is None:
            super().__init__("No shared tokens between the two vocabularies")
        else:
            super().__init__(f"No shared tokens between periods {pair[0]} and {pair[1]}")


class PeriodGap(DataError):
    pass


class UnknownToken(DataError):
    pass


class ModelFormatError(DataError):
    pass
