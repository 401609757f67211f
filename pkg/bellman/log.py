from __future__ import annotations

import logging

from bellman.settings import rich_logging

TAG = "\x1b[35m(bellman)\x1b[0m"


class RichTag(logging.Filter):
    """Prepends the magenta ``(bellman)`` tag to the messages of a logger."""

    def filter(self, record: logging.LogRecord) -> bool:
        record.msg = f"{TAG} {record.msg}"
        return True


rich_tag = RichTag()


def get_logger(name: str) -> logging.Logger:
    """
    Get the bellman logger for a module.

    Long evolutions interleave messages from the chord, force and evolution modules. When the ``rich_logging``
    setting is True the messages carry a tag so they stand out from the output of the calling application:
    INFO:bellman.evolution:(bellman) Critical point at eps=0.65734204 (angle_meets_chord)
    """
    logger = logging.getLogger(name)
    if rich_logging and rich_tag not in logger.filters:
        logger.addFilter(rich_tag)
    return logger
