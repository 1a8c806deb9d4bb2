"""
Logging utilities for the solver library and CLI
"""
import logging
import os
from logging.handlers import RotatingFileHandler

from pythonjsonlogger import jsonlogger

ROOT_LOGGER = 'prk'
JSON_FIELDS = '%(asctime)s %(levelname)s %(name)s %(message)s'
MAX_LOG_BYTES = 10 * 1024 * 1024
LOG_BACKUPS = 10


def _json_file_handler(path, level):
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    handler = RotatingFileHandler(path, maxBytes=MAX_LOG_BYTES, backupCount=LOG_BACKUPS)
    handler.setLevel(level)
    handler.setFormatter(jsonlogger.JsonFormatter(JSON_FIELDS))
    return handler


def setup_logging(config):
    """Attach a JSON file handler (when a file is configured) and a stderr
    handler to the `prk` logger tree. Calling it again replaces both."""
    settings = config.LOGGING_CONFIG
    level = logging.getLevelName(settings['level'].upper())
    tree = logging.getLogger(ROOT_LOGGER)
    tree.handlers.clear()

    if settings.get('file'):
        tree.addHandler(_json_file_handler(settings['file'], level))

    # stdout carries result envelopes only
    console = logging.StreamHandler()
    console.setLevel(level)
    console.setFormatter(logging.Formatter(settings['format']))
    tree.addHandler(console)

    tree.setLevel(level)
    tree.propagate = False
    return tree


class AppLogger:
    """Thin wrapper that turns keyword arguments into structured `extra` fields"""

    def __init__(self, name):
        if name != ROOT_LOGGER and not name.startswith(ROOT_LOGGER + '.'):
            name = f'{ROOT_LOGGER}.{name}'
        self.logger = logging.getLogger(name)

    def _log(self, level, message, fields, exc_info=False):
        self.logger.log(level, message, extra=fields, exc_info=exc_info)

    def debug(self, message, **fields):
        self._log(logging.DEBUG, message, fields)

    def info(self, message, **fields):
        self._log(logging.INFO, message, fields)

    def warning(self, message, **fields):
        self._log(logging.WARNING, message, fields)

    def error(self, message, **fields):
        self._log(logging.ERROR, message, fields)

    def exception(self, message, **fields):
        self._log(logging.ERROR, message, fields, exc_info=True)


def get_logger(name):
    return AppLogger(name)
