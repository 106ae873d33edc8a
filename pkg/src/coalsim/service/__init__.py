from . import schemas  # noqa: F401


def get_app():
    from .app import app

    return app
