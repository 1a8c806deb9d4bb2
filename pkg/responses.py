"""
CLI result envelopes and the exception-to-exit-code mapping
"""
import sys

from artifact_store import dumps_json
from errors import PhaseKaczmarzError

EXIT_OK = 0
EXIT_INTERNAL = 1
EXIT_VALIDATION = 2
EXIT_ALGORITHM = 3
EXIT_IO = 4


def _envelope(status, message, **fields):
    body = {"status": status, "message": message}
    body.update({key: value for key, value in fields.items() if value is not None})
    return body


class RunResponse:
    """Builds `(envelope, exit_code)` pairs; `emit` prints one to stdout."""

    @staticmethod
    def success(data=None, message="Success"):
        return _envelope("success", message, data=data), EXIT_OK

    @staticmethod
    def error(message="Error", error_code=None, exit_code=EXIT_INTERNAL, data=None):
        return _envelope("error", message, error_code=error_code, data=data), exit_code

    @staticmethod
    def validation_error(errors):
        body = _envelope("error", "Validation failed", error_code="VALIDATION_ERROR", errors=errors)
        return body, EXIT_VALIDATION

    @staticmethod
    def emit(response, stream=None):
        stream = stream or sys.stdout
        stream.write(dumps_json(response))
        stream.flush()


class ErrorHandler:

    @staticmethod
    def handle_validation_error(errors):
        """Keep the first marshmallow message per field"""
        flat = {}
        for field, messages in errors.items():
            if isinstance(messages, list):
                flat[field] = messages[0] if messages else "Invalid value"
            else:
                flat[field] = str(messages)
        return RunResponse.validation_error(flat)

    @staticmethod
    def handle_exception(exc, logger=None):
        """Library errors keep their own code; anything else is internal"""
        if not isinstance(exc, PhaseKaczmarzError):
            if logger:
                logger.exception("Unexpected error", error=str(exc))
            return RunResponse.error(str(exc), "INTERNAL_ERROR", EXIT_INTERNAL)

        if logger:
            logger.warning("Command failed", error=str(exc), error_code=exc.error_code)
        cluster_sizes = getattr(exc, 'cluster_sizes', None)
        data = {"cluster_sizes": cluster_sizes} if cluster_sizes else None
        return RunResponse.error(str(exc), exc.error_code, exc.exit_code, data)
