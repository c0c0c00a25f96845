"""Structured event logging shared by the toolkit modules."""
import json
import logging


def get_logger(name: str) -> logging.Logger:
    return logging.getLogger(f"stealthkit.{name}")


def log_event(logger: logging.Logger, level: str, event: str, **fields):
    """Emit one JSON object per event. Never pass private scalars or chain values."""
    payload = {'event': event, **fields}
    message = json.dumps(payload, sort_keys=True, default=str)
    getattr(logger, level, logger.info)(message)
