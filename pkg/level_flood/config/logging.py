"""Structlog configuration for JSON logging on stderr.

CSV results own stdout, so every log line goes to stderr.
"""

import logging
import os
import socket
import sys
from typing import Any

import structlog

from level_flood.config.settings import Settings

__all__ = ["configure_logging"]


class _AddResource:
    """Add resource attributes (service metadata) to each log event.

    Parameters
    ----------
    active : Settings
        Settings the service name, version and environment are read from.
    """

    def __init__(self, active: Settings) -> None:
        self.service = {
            "service.name": active.app_name,
            "service.version": active.version,
            "deployment.environment": active.deployment_environment,
        }

    def __call__(
        self, _logger: Any, _method_name: str, event_dict: dict[str, Any]
    ) -> dict[str, Any]:
        """Return ``event_dict`` with a ``resource`` mapping added.

        Parameters
        ----------
        _logger : Any
            The logger instance (unused).
        _method_name : str
            The log method name (unused).
        event_dict : dict[str, Any]
            The current event dictionary being processed.

        Returns
        -------
        dict[str, Any]
            Updated event dictionary with resource information added.
        """
        resource = {
            **self.service,
            "host.name": os.getenv("HOST", socket.gethostname()),
        }

        namespace = os.getenv("SERVICE_NAMESPACE", None)
        if namespace is not None:
            resource["service.namespace"] = namespace

        event_dict["resource"] = resource
        return event_dict


def _filter_empty_values(
    _logger: Any, _method_name: str, event_dict: dict[str, Any]
) -> dict[str, Any]:
    """Remove None values from event dictionary.

    Parameters
    ----------
    _logger : Any
        The logger instance (unused).
    _method_name : str
        The log method name (unused).
    event_dict : dict[str, Any]
        The current event dictionary being processed.

    Returns
    -------
    dict[str, Any]
        Event dictionary with None values removed.
    """
    return {k: v for k, v in event_dict.items() if v is not None}


def configure_logging(active: Settings | None = None) -> None:
    """Configure structlog for the process.

    Parameters
    ----------
    active : Settings, optional
        Settings that pick the level and the resource fields. Fresh defaults
        from the environment when omitted. ``debug=True`` forces DEBUG.
    """
    chosen = active if active is not None else Settings()
    level = logging.getLevelNamesMapping()[chosen.effective_log_level]

    structlog.configure(
        processors=[
            structlog.processors.add_log_level,
            structlog.processors.TimeStamper(fmt="iso"),
            _AddResource(chosen),
            _filter_empty_values,
            structlog.processors.JSONRenderer(),
        ],
        wrapper_class=structlog.make_filtering_bound_logger(level),
        # PrintLoggerFactory writes text, which JSONRenderer produces
        logger_factory=structlog.PrintLoggerFactory(file=sys.stderr),
        cache_logger_on_first_use=False,
    )
