"""Colored console output and logging setup."""
import logging
import sys

from colorama import Fore, Style

LEVEL_COLORS = {
    logging.DEBUG: Style.DIM,
    logging.INFO: "",
    logging.WARNING: Fore.YELLOW,
    logging.ERROR: Fore.RED,
    logging.CRITICAL: Fore.RED + Style.BRIGHT,
}


class ColorFormatter(logging.Formatter):
    """Prefix records with their level and tint them by severity."""

    def format(self, record: logging.LogRecord) -> str:
        message = super().format(record)
        color = LEVEL_COLORS.get(record.levelno, "")
        if not color:
            return message
        return color + message + Style.RESET_ALL


def setup_logging(verbose: bool = False):
    """Install one stderr handler on the root logger; -v switches to DEBUG."""
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(ColorFormatter("%(levelname)s %(name)s: %(message)s"))
    root = logging.getLogger()
    for old in list(root.handlers):
        root.removeHandler(old)
    root.addHandler(handler)
    root.setLevel(logging.DEBUG if verbose else logging.INFO)


def info(message: str):
    print(Fore.GREEN + message + Style.RESET_ALL)


def note(message: str):
    print(Fore.YELLOW + message + Style.RESET_ALL)


def error(message: str):
    print(Fore.RED + message + Style.RESET_ALL, file=sys.stderr)
