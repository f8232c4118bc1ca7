"""
Logging setup for neutrosophic-eval.
Configures console logging and an OpenTelemetry tracer for experiment runs and report builds.
Span export is opt-in: set NEUTRO_EVAL_TRACE_CONSOLE to print finished spans to the console.
"""

import logging
import os

from opentelemetry import trace
from opentelemetry.sdk.resources import SERVICE_NAME, Resource
from opentelemetry.sdk.trace import TracerProvider
from opentelemetry.sdk.trace.export import BatchSpanProcessor, ConsoleSpanExporter

# Configure OpenTelemetry tracing
_provider = TracerProvider(resource=Resource.create({SERVICE_NAME: "neutrosophic-eval"}))
if os.environ.get("NEUTRO_EVAL_TRACE_CONSOLE"):
    _provider.add_span_processor(BatchSpanProcessor(ConsoleSpanExporter()))
trace.set_tracer_provider(_provider)
tracer = trace.get_tracer("neutrosophic-eval")

# Configure basic logging to console
logging.basicConfig(
    level=logging.INFO,  # Default log level - adjustable with set_log_level / --log-level
    format="%(asctime)s - %(levelname)s - %(filename)s:%(lineno)d - %(message)s",
    datefmt="%Y-%m-%d %H:%M:%S",
)

logger = logging.getLogger("NeutroEvalLogger")

_LEVELS = {
    "DEBUG": logging.DEBUG,
    "INFO": logging.INFO,
    "WARNING": logging.WARNING,
    "ERROR": logging.ERROR,
}


def set_log_level(level):
    """
    Sets the verbosity of the shared logger.

    Args:
        level (str): One of 'DEBUG', 'INFO', 'WARNING', 'ERROR' (case-insensitive).
    """
    name = str(level).upper()
    if name not in _LEVELS:
        raise ValueError(f"Unsupported log level: {level}")
    logger.setLevel(_LEVELS[name])


def log_traced(message, level="INFO", **attributes):
    """
    Logs a message inside a span so that it also shows up in exported traces.

    Args:
        message (str): The log message.
        level (str): Log level ('INFO', 'WARNING', 'ERROR', 'DEBUG').
        **attributes: Span attributes (model slug, stimulus id, status, ...).
    """
    with tracer.start_as_current_span("NeutroEvalLog") as span:
        for key, value in attributes.items():
            span.set_attribute(key, str(value))
        log_level = _LEVELS.get(str(level).upper())
        if log_level is None:
            logger.error(f"Unsupported log level: {level}")
            return
        logger.log(log_level, message)
