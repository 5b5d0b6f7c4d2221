"""Filename utilities for reports and counterexample dumps."""

import re
from datetime import datetime
from pathlib import Path


def sanitize_for_filename(text: str) -> str:
    """Convert text to filename-safe string."""
    if not text:
        return "unknown"
    # Replace spaces and special chars with underscores, lowercase
    sanitized = re.sub(r'[^\w\s-]', '', text.lower())
    sanitized = re.sub(r'[\s_-]+', '_', sanitized)
    return sanitized.strip('_')


def generate_report_filename(ideal_path: Path, real_path: Path, timestamp: datetime | None = None) -> str:
    """Format: timestamp_ideal_vs_real.json"""
    if timestamp is None:
        timestamp = datetime.now()
    stamp = timestamp.strftime("%Y-%m-%d_%H-%M-%S")
    return f"{stamp}_{sanitize_for_filename(ideal_path.stem)}_vs_{sanitize_for_filename(real_path.stem)}.json"


def generate_counterexample_filename(suite: str, seed: int, instance: int) -> str:
    """Format: suite_seedN_instanceM.json"""
    return f"{sanitize_for_filename(suite)}_seed{seed}_instance{instance}.json"
