class PresslabError(Exception):
    pass


class CapExceededError(PresslabError):
    """An enumeration would exceed the configured pattern cap."""

    def __init__(self, message, window=None):
        super().__init__(message)
        self.window = window


class EmptySystemError(PresslabError):
    pass


class WindowTooSmallError(PresslabError):
    pass


class ConfigError(PresslabError):
    pass
