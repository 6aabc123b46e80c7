class ServiceError(Exception):
    """Expected failure that should be shown to the user."""

    pass


class LoadError(ServiceError):
    """A mandatory dataset or artifact file is missing or unreadable."""


class FormatError(ServiceError):
    """Malformed input file content."""

    def __init__(self, message: str, *, path=None, line: int | None = None):
        location = ""
        if path is not None:
            location = f"{path}"
            if line is not None:
                location += f":{line}"
            location += ": "
        super().__init__(f"{location}{message}")
        self.path = path
        self.line = line


class GraphError(ServiceError):
    """A graph violates the simple-graph invariants."""


class DomainError(ServiceError):
    """Input outside the mathematical domain of the operation."""


class ArgumentError(ServiceError):
    pass


class ShapeError(ServiceError):
    def __init__(self, op: str, *shapes):
        rendered = " vs ".join(f"{s[0]}x{s[1]}" for s in shapes)
        super().__init__(f"{op}: incompatible shapes {rendered}")
        self.op = op
        self.shapes = shapes


class ContractError(ServiceError):
    """Caller broke an operation precondition."""


class NonFiniteError(ServiceError):
    def __init__(self, message: str, *, epoch: int | None = None, batch: int | None = None):
        if epoch is not None:
            message = f"epoch {epoch}, batch {batch}: {message}"
        super().__init__(message)
        self.epoch = epoch
        self.batch = batch


class ConfigError(ServiceError):
    def __init__(self, message: str, *, valid_keys=()):
        if valid_keys:
            message = f"{message} (valid keys: {', '.join(sorted(valid_keys))})"
        super().__init__(message)
        self.valid_keys = tuple(valid_keys)


class CheckpointError(ServiceError):
    pass


class StratificationError(ServiceError):
    pass
