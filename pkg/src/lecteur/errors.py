"""Shared exception types mapped to CLI exit codes."""


class UsageError(Exception):
    """Bad invocation: unknown flags, missing required arguments. Exit code 1."""


class DataError(Exception):
    """Malformed or missing input data: corpora, manifests, lexica, checkpoints. Exit code 2."""


class PipelineError(Exception):
    """Runtime failure inside a pipeline stage. Exit code 3."""

    def __init__(self, stage: str, detail: str):
        self.stage = stage
        self.detail = detail
        super().__init__(f"[{stage}] {detail}")
