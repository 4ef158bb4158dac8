import os
import logging
from . import utils
from .app import app

logger = logging.getLogger(__name__)

def init_app(config_file=None):
    app.config.from_object('learntrack.default_settings')

    if config_file:
        # take the absolute path, otherwise Flask looks for file relative to the app
        # insted of PWD.
        config_path = os.path.abspath(config_file)

        app.config.from_pyfile(config_path, silent=True)
        logger.info("init_app %s", config_path)

    if os.getenv('LEARNTRACK_SETTINGS'):
        app.config.from_envvar('LEARNTRACK_SETTINGS')

    utils.setup_logging(app)

    # receivers for the domain signals
    from . import audits

    # register the commands
    from . import commands

    return app
