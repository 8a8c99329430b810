import functools
import json
import logging
from typing import Any, Callable, NoReturn

import click
from pydantic import ValidationError

logger = logging.getLogger(__name__)


class CommandFailed(click.ClickException):
    """Runtime failure of a subcommand; exits 1 with a single JSON line on stderr."""

    exit_code = 1

    def __init__(self, error: str, message: str, command: str):
        super().__init__(message)
        self.error = error
        self.command = command

    def format_message(self) -> str:
        return json.dumps({"error": self.error, "message": self.message, "command": self.command})

    def show(self, file: Any = None) -> None:
        click.echo(self.format_message(), err=True)


def handle_command_error(error: Exception, command: str) -> NoReturn:
    """
    Consistent error handling for CLI subcommands

    Args:
        error: The caught exception
        command: Name of the subcommand being run (for logging)

    Raises:
        CommandFailed: With the error category and message
    """
    if isinstance(error, (ValueError, ValidationError, FileNotFoundError)):
        message = str(error).replace("\n", "; ")
        logger.error(f"Validation error in {command}: {message}")
        raise CommandFailed("Validation error", message, command) from error
    logger.error(f"Error in {command}: {error}", exc_info=True)
    raise CommandFailed("Internal error", str(error).replace("\n", "; "), command) from error


def command_errors(command: str) -> Callable:
    """Route every non-click exception raised by the wrapped command through handle_command_error."""

    def decorator(fn: Callable) -> Callable:
        @functools.wraps(fn)
        def wrapper(*args: Any, **kwargs: Any) -> Any:
            try:
                return fn(*args, **kwargs)
            except click.ClickException:
                raise
            except Exception as error:
                handle_command_error(error, command)

        return wrapper

    return decorator
