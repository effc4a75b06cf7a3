"""Exception types shared across lfgen."""


class LfgenError(Exception):
    pass


class ConfigError(LfgenError, ValueError):
    """Invalid configuration; ``field`` is the dotted path of the offending key."""

    def __init__(self, field, message):
        self.field = field
        super().__init__(f"{field}: {message}")


class DatasetIOError(LfgenError, OSError):
    """Filesystem failure while writing or reading a dataset."""

    def __init__(self, path, message):
        self.path = str(path)
        super().__init__(f"{self.path}: {message}")


class BehindCameraError(LfgenError, ValueError):
    pass


class MissingDataError(LfgenError, LookupError):
    """A requested scene, view or manifest does not exist."""
