"""Exception types raised across the package."""


class PosePropError(Exception):
    pass


class ConfigError(PosePropError, ValueError):
    def __init__(self, field, message):
        super().__init__(f"{field}: {message}")
        self.field = field


class ArgumentError(PosePropError, ValueError):
    pass


class TrainingError(PosePropError):
    pass


class PipelineError(PosePropError):
    pass


class ParseError(PosePropError):
    def __init__(self, path, line, message):
        super().__init__(f"{path}:{line}: {message}")
        self.path = str(path)
        self.line = line
