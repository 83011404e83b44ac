"""
Exception hierarchy shared by the controllers, the event loop and the CLI.
"""


class LockeError(Exception):
    """Base class for every simulator error"""


class ProtocolError(LockeError):
    """An error cell ("e") of a state table was reached"""

    def __init__(self, node, state, event, stimulus=None):
        self.node = node
        self.state = state
        self.event = event
        self.stimulus = stimulus
        detail = f" on {stimulus}" if stimulus is not None else ""
        super().__init__(f"error cell reached at {node}: ({state}, {event}){detail}")


class ProtocolFault(LockeError):
    """Internal accounting fault: token overdraft, unmatched ack, misrouted message"""


class ConfigError(LockeError, ValueError):
    """Invalid simulator configuration"""


class TraceError(LockeError, ValueError):
    """Malformed trace text"""

    def __init__(self, message: str, line_no: int | None = None):
        self.line_no = line_no
        if line_no is not None:
            message = f"{message} at line {line_no}"
        super().__init__(message)


class ScheduleError(LockeError):
    """A replayed schedule names a choice that is not enabled"""
