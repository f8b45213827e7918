"""Exception hierarchy shared by the engine and the command line front end"""


class ExchangeError(Exception):
    """Base class for every error raised by the toolkit"""
    exit_code = 1

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.message = message
        self.diagnostics = dict(diagnostics or {})

    def to_dict(self):
        """Machine-readable form written to standard error by the CLI"""
        return {
            'error': type(self).__name__,
            'message': self.message,
            'exit_code': self.exit_code,
            'diagnostics': self.diagnostics,
        }


class ConfigError(ExchangeError):
    """Run configuration could not be parsed or failed validation"""
    exit_code = 2


class InvalidInputError(ExchangeError, ValueError):
    """A physical input is outside its allowed range (E <= 0, mu <= 0, ...)"""
    exit_code = 3


class PhysicsDomainError(ExchangeError):
    """The request is valid input but outside the domain the method covers"""
    exit_code = 3


class ConvergenceError(ExchangeError):
    """A numerical procedure did not reach its tolerance"""
    exit_code = 4


class CalibrationError(ExchangeError):
    """Calibration could not bracket the target band"""
    exit_code = 5

    def __init__(self, message, trace=None, diagnostics=None):
        super().__init__(message, diagnostics)
        self.trace = list(trace or [])
        self.diagnostics.setdefault('trace', self.trace)
