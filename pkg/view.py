import logging
import sys
from typing import Optional, TextIO

logger = logging.getLogger(__name__)


class ConsoleView:
    """Console output for command results, warnings and errors."""

    def __init__(self, quiet: bool = False, stream: Optional[TextIO] = None, error_stream: Optional[TextIO] = None):
        self.quiet = quiet
        self._stream = stream
        self._error_stream = error_stream

    @property
    def stream(self) -> TextIO:
        return self._stream or sys.stdout

    @property
    def error_stream(self) -> TextIO:
        return self._error_stream or sys.stderr

    def show_report(self, text: str) -> None:
        """Reports are command results and are printed even when quiet."""
        self.stream.write(text if text.endswith("\n") else text + "\n")
        self.stream.flush()

    def show_info(self, message: str) -> None:
        if not self.quiet:
            print(message, file=self.stream)

    def show_warning(self, message: str, title: str = "Warning") -> None:
        print(f"{title}: {message}", file=self.error_stream)

    def show_error(self, message: str, title: str = "Error") -> None:
        print(f"{title}: {message}", file=self.error_stream)
