import logging

import config
from config import get_build_tag, get_config
from logger import get_logger, setup_logging


def test_testing_config_selected():
    settings = get_config()
    assert isinstance(settings, config.TestingConfig)
    assert settings.LOGGING_CONFIG['file'] == ''


def test_build_tag_from_environment():
    assert get_build_tag() == 'prk-test'


def test_build_tag_falls_back(monkeypatch):
    monkeypatch.delenv('PRK_BUILD_TAG')
    monkeypatch.setattr('config._git_describe', lambda: None)
    assert get_build_tag().startswith('prk-')


def test_logging_setup_without_file():
    logger = setup_logging(config.TestingConfig())
    assert logger.name == 'prk'
    assert all(not isinstance(h, logging.FileHandler) for h in logger.handlers)


def test_app_logger_prefix():
    assert get_logger('solver').logger.name == 'prk.solver'
    assert get_logger('prk.cli').logger.name == 'prk.cli'
