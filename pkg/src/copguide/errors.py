"""Exception types shared across the package."""


class SchemaError(ValueError):
    """A file or record does not conform to its expected layout.

    ``line`` is the 1-based line number in the offending file when known.
    """

    def __init__(self, message, line=None, path=None):
        self.line = line
        self.path = path
        where = ""
        if path is not None:
            where += f"{path}"
        if line is not None:
            where += f"{':' if where else 'line '}{line}"
        super().__init__(f"{where}: {message}" if where else message)


class ProtocolError(RuntimeError):
    """A live-stream client violated the line protocol."""
