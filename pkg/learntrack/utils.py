import logging
from logging import StreamHandler


def setup_logging(app):
    # every learntrack.* logger, app.logger included, propagates to this one
    logger = logging.getLogger(app.config.get("LOGGER_NAME", "learntrack"))
    logger.setLevel(app.config.get("LOG_LEVEL", logging.INFO))

    formatter = logging.Formatter(
    "%(asctime)s [%(levelname)s] [%(name)s] - %(message)s")

    handler = StreamHandler()
    handler.setFormatter(formatter)
    logger.handlers = []
    logger.addHandler(handler)


def chunked(values, size):
    """Yields consecutive slices of `values` with at most `size` rows each.
    """
    for start in range(0, len(values), size):
        yield values[start:start + size]
