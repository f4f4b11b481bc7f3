# utils/log_utils.py
# Log callback plumbing shared by the engines and the command line front-end.
import sys
from typing import Callable, Optional

LogCb = Callable[[str, Optional[str]], None]

# tag -> visible prefix (same markers the log pane used)
LOG_PREFIX = {
    "error": "❌ ",
    "success": "✅ ",
    "warning": "⚠️ ",
}

_STDERR_TAGS = ("error", "warning")


def safe_log(log_cb: Optional[LogCb], text: str, tag: Optional[str] = None):
    """Deliver ``text`` to ``log_cb``; never raises.

    A missing or failing callback degrades to ``print`` so that warnings from
    library code are not swallowed.
    """
    if log_cb is not None:
        try:
            log_cb(text, tag)
            return
        except Exception:
            pass
    try:
        print(LOG_PREFIX.get(tag or "", "") + text.rstrip("\n"), file=sys.stderr)
    except Exception:
        pass


def console_log(text: str, tag: Optional[str] = None):
    """Default terminal sink: prefixes by tag, warnings and errors go to stderr."""
    prefix = LOG_PREFIX.get(tag or "", "")
    stream = sys.stderr if tag in _STDERR_TAGS else sys.stdout
    body = text.rstrip("\n")
    if not body:
        return
    # keep multi-line messages aligned under the prefix
    lines = body.split("\n")
    stream.write(prefix + lines[0] + "\n")
    for extra in lines[1:]:
        stream.write(" " * len(prefix) + extra + "\n")
    stream.flush()


class LogCollector:
    """Callback that records ``(text, tag)`` pairs; used by tests and reports."""

    def __init__(self, echo: Optional[LogCb] = None):
        self.records = []
        self._echo = echo

    def __call__(self, text: str, tag: Optional[str] = None):
        self.records.append((text, tag))
        if self._echo is not None:
            self._echo(text, tag)

    def by_tag(self, tag: str):
        return [text for text, t in self.records if t == tag]
