import os

import click
from flask.cli import FlaskGroup

from learntrack.main import init_app


def create_app():
    config = os.getenv("LEARNTRACK_CONFIG", "config/development.cfg")
    return init_app(config)


@click.group(cls=FlaskGroup, create_app=create_app, add_default_commands=False)
def manager():
    """Learning-based tracking control experiments.

    Command names are hyphenated: reproduce-paper, show-config.
    """


if __name__ == '__main__':
    manager()
