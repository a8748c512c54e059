import logging

from rich.console import Console
from rich.logging import RichHandler
from rich.theme import Theme

_APP_THEME = Theme(
    {
        "header": "bold orange3",
        "muted": "grey58",
        "panel_border": "blue",
        "panel_title": "bold white",
        "info": "cyan",
        "success": "green",
        "error": "red",
        "warning": "yellow",
        "stage": "magenta",
        "value": "bold cyan",
    }
)

console = Console(theme=_APP_THEME)
err_console = Console(theme=_APP_THEME, stderr=True)

LOGGER_NAME = "sdde"


def configure_console(plain: bool) -> None:
    global console, err_console
    if plain:
        console = Console(theme=_APP_THEME, no_color=True)
        err_console = Console(theme=_APP_THEME, no_color=True, stderr=True)
    else:
        console = Console(theme=_APP_THEME)
        err_console = Console(theme=_APP_THEME, stderr=True)


def configure_logging(level: str = "WARNING") -> logging.Logger:
    """Route the ``sdde.*`` loggers through a single rich handler on stderr."""
    logger = logging.getLogger(LOGGER_NAME)
    for handler in list(logger.handlers):
        logger.removeHandler(handler)
    handler = RichHandler(console=err_console, show_path=False, rich_tracebacks=False)
    handler.setFormatter(logging.Formatter("%(name)s: %(message)s"))
    logger.addHandler(handler)
    logger.setLevel(level.upper())
    logger.propagate = False
    return logger


def status_style(status: str) -> str:
    return {"PASS": "success", "FAIL": "error"}.get(status.upper(), "warning")
