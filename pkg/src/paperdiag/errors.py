"""Exception hierarchy. Every error carries a stable ``code`` for event logs."""

from __future__ import annotations


class PaperDiagError(Exception):
    code = "E_GENERIC"


# corpus ingest
class IndexFetchError(PaperDiagError):
    code = "E_INDEX_FETCH"
    retryable = True


class IndexParseError(PaperDiagError):
    code = "E_INDEX_PARSE"

    def __init__(self, message: str, record=None):
        super().__init__(message)
        self.record = record


class ManifestParseError(PaperDiagError):
    code = "E_MANIFEST_PARSE"

    def __init__(self, message: str, line: int | None = None):
        super().__init__(f"line {line}: {message}" if line is not None else message)
        self.line = line


class DuplicateEntry(ManifestParseError):
    code = "E_MANIFEST_DUPLICATE"


# latex parsing
class NoMainFile(PaperDiagError):
    code = "E_NO_MAIN_FILE"


class CyclicInclude(PaperDiagError):
    code = "E_CYCLIC_INCLUDE"

    def __init__(self, cycle: list[str]):
        super().__init__("cyclic include: " + " -> ".join(cycle))
        self.cycle = cycle


class EmptyDocument(PaperDiagError):
    code = "E_EMPTY_DOCUMENT"


class UnknownLabel(PaperDiagError, KeyError):
    code = "E_UNKNOWN_LABEL"


# table rendering
class CompileFailed(PaperDiagError):
    code = "E_COMPILE_FAILED"

    def __init__(self, message: str, log: str = ""):
        super().__init__(f"{message}\n{log}" if log else message)
        self.log = log


class CompileTimeout(CompileFailed):
    code = "E_COMPILE_TIMEOUT"


class PageOutOfRange(PaperDiagError, IndexError):
    code = "E_PAGE_OUT_OF_RANGE"


class NoTableDetected(PaperDiagError):
    code = "E_NO_TABLE_DETECTED"


# llm-backed stages
class LlmTransportError(PaperDiagError):
    code = "E_LLM_TRANSPORT"


class EmptyOutline(PaperDiagError):
    code = "E_EMPTY_OUTLINE"


class OutlineUnavailable(PaperDiagError):
    code = "E_OUTLINE_UNAVAILABLE"


class JudgeFormatError(PaperDiagError):
    code = "E_JUDGE_FORMAT"


# pipeline
class ConfigError(PaperDiagError, ValueError):
    code = "E_CONFIG"


class MissingCheckpoint(PaperDiagError):
    code = "E_MISSING_CHECKPOINT"


class PredictionError(PaperDiagError, ValueError):
    code = "E_PREDICTIONS"
