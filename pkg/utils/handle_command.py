import functools
import logging
import sys
from argparse import ArgumentParser, Namespace
from typing import Callable, NoReturn

from config.constants import EXIT_OK
from utils.custom_exceptions import InvalidConfigError, RobustControlError

CommandHandler = Callable[[Namespace, logging.Logger], int | None]


def report_error(code: str, command: str, message: str) -> None:
    """Writes the single machine-parsable failure line to stderr."""
    text = " ".join(str(message).split()).replace('"', '\\"')
    sys.stderr.write(f'error={code} command={command} message="{text}"\n')
    sys.stderr.flush()


def handle_command(name: str):
    """
    Decorator for CLI command handlers:
    1. Run the handler and map a `None` result to exit code 0.
    2. Log any failure with its traceback.
    3. Report it as one `error=<code> command=<name> message="..."` line on
       stderr and return the exception's exit code.
    """

    def decorator(func: CommandHandler):
        @functools.wraps(func)
        def wrapper(args: Namespace, logger: logging.Logger) -> int:
            try:
                logger.info(f"Running {name}...")
                result = func(args, logger)
                logger.info(f"{name} finished.")
                return EXIT_OK if result is None else result
            except RobustControlError as e:
                logger.error(f"{name} failed: {e.message}", exc_info=e)
                report_error(e.code, name, e.message)
                return e.exit_code
            except Exception as e:
                logger.error("An unexpected error occurred", exc_info=e)
                report_error(RobustControlError.code, name, f"{e}")
                return RobustControlError.exit_code

        return wrapper

    return decorator


class CommandParser(ArgumentParser):
    """Argument parser whose usage errors follow the one-line error format."""

    def error(self, message: str) -> NoReturn:
        # subcommand parsers are named "<prog> <command>"
        command = self.prog.split()[-1]
        report_error(InvalidConfigError.code, command, message)
        sys.exit(InvalidConfigError.exit_code)
