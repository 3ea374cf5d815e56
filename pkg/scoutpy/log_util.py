"""A logging module for use with scoutpy."""

import os, time, logging
try:
    from pathlib import Path
except ImportError:
    from pathlib2 import Path

_console_levels = {
    'error': logging.ERROR,
    'info': logging.INFO,
    'debug': logging.DEBUG,
    }

## Following adapted from https://docs.python.org/3/howto/logging-cookbook.html

def console_level():
    """Returns the console log level selected through SCOUT_LOG_LEVEL.
        Unknown values fall back to 'error'."""
    return _console_levels.get(
        os.environ.get('SCOUT_LOG_LEVEL', 'error').strip().lower(),
        logging.ERROR)

def get_logger(name):
    # create logger with module name
    logger = logging.getLogger(name)
    if logger.handlers:
        # already configured by an earlier import
        return logger
    logger.setLevel(logging.DEBUG)
    logger.propagate = False
    # create log path, if not already there
    logPath = Path(os.environ.get('SCOUT_LOG_DIR', 'logs'))
    if not logPath.exists():
        logPath.mkdir(parents=True)
    # create file handler which logs even debug messages
    fh = logging.FileHandler(
        str(logPath / ('scoutpy-%s.log' % time.strftime('%Y%m%d'))))
    fh.setLevel(logging.DEBUG)
    # create console handler with the level chosen through the environment
    ch = logging.StreamHandler()
    ch.setLevel(console_level())
    # create formatter and add it to the handlers
    formatter = logging.Formatter('%(asctime)s - %(name)s - %(levelname)s - %(message)s')
    fh.setFormatter(formatter)
    ch.setFormatter(formatter)
    # add the handlers to the logger
    logger.addHandler(fh)
    logger.addHandler(ch)
    logger.debug("Module loaded.")
    return logger
