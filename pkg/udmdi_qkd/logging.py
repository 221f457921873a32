import contextvars
import logging
import os
import sys
import uuid
from datetime import datetime, timezone
from logging.handlers import TimedRotatingFileHandler
from typing import Any, Dict, Optional

from pythonjsonlogger import jsonlogger

from .config import settings

# Correlation id for one CLI invocation or library run
run_id_var: contextvars.ContextVar[Optional[str]] = contextvars.ContextVar("run_id", default=None)

# Domain context copied from ``extra`` onto the JSON record when present
CONTEXT_KEYS = ("scenario", "distance_km", "modulation_variance", "block_length", "trial", "preset")


class EnrichedJsonFormatter(jsonlogger.JsonFormatter):
    def add_fields(self, log_record, record, message_dict):
        super().add_fields(log_record, record, message_dict)
        log_record["timestamp"] = datetime.fromtimestamp(record.created, tz=timezone.utc).isoformat()
        log_record["level"] = record.levelname.lower()
        log_record.setdefault("service", settings.service_name)
        log_record.setdefault("env", settings.app_env)
        rid = getattr(record, "run_id", None) or run_id_var.get()
        if rid:
            log_record["run_id"] = rid
        for attr, key in (("module_name", "module"), ("operation", "process")):
            value = getattr(record, attr, None)
            if value:
                log_record[key] = value
        log_record.update(
            {attr: getattr(record, attr) for attr in CONTEXT_KEYS if getattr(record, attr, None) is not None}
        )


class BaseContextFilter(logging.Filter):
    def filter(self, record: logging.LogRecord) -> bool:
        defaults = {"service": settings.service_name, "env": settings.app_env, "run_id": run_id_var.get()}
        for name, value in defaults.items():
            if not hasattr(record, name):
                setattr(record, name, value)
        return True


def _attach(logger: logging.Logger, handler: logging.Handler, formatter: logging.Formatter) -> None:
    handler.setFormatter(formatter)
    handler.addFilter(BaseContextFilter())
    logger.addHandler(handler)


def setup_logging(level: Optional[str] = None) -> logging.Logger:
    """
    Service logger writing JSON records to stderr, and to a rotating file when
    ``LOG_TO_FILE`` is set. Stdout stays reserved for CSV output.
    """
    logger = logging.getLogger(settings.service_name)
    if level:
        logger.setLevel(getattr(logging, level.upper(), logging.INFO))
    if logger.handlers:
        return logger

    if not level:
        logger.setLevel(getattr(logging, settings.log_level, logging.INFO))
    logger.propagate = False
    formatter = EnrichedJsonFormatter(fmt="%(message)s")
    _attach(logger, logging.StreamHandler(sys.stderr), formatter)

    if settings.log_to_file:
        try:
            os.makedirs(os.path.dirname(settings.log_file) or ".", exist_ok=True)
        except OSError:
            pass
        rotating = TimedRotatingFileHandler(
            settings.log_file,
            when=settings.log_rotate_when,
            interval=settings.log_rotate_interval,
            backupCount=settings.log_backup_count,
            encoding="utf-8",
            utc=True,
        )
        _attach(logger, rotating, formatter)

    return logger


def build_log_extra(module_name: Optional[str] = None, operation: Optional[str] = None, **context: Any) -> Dict[str, Any]:
    """``extra`` dict for a log call; ``None`` context values are dropped."""
    extra: Dict[str, Any] = {}
    if module_name:
        extra["module_name"] = module_name
    if operation:
        extra["operation"] = operation
    rid = run_id_var.get()
    if rid:
        extra["run_id"] = rid
    extra.update({k: v for k, v in context.items() if v is not None})
    return extra


def ensure_run_id() -> str:
    """Current correlation id, generating one for library runs started outside the CLI."""
    rid = run_id_var.get()
    if not rid:
        rid = set_new_run_id()
    return rid


def set_new_run_id() -> str:
    rid = str(uuid.uuid4())
    run_id_var.set(rid)
    return rid
