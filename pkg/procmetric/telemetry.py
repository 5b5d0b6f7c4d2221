"""Logfire setup shared by the library and the CLI."""

import os

import logfire
from dotenv import load_dotenv

# Load environment variables at module import
load_dotenv()

# Local logging only; console echo is opt-in
logfire.configure(
    send_to_logfire=False,
    console=logfire.ConsoleOptions() if os.getenv("PROCMETRIC_LOG_CONSOLE", "").lower() in {"1", "true", "yes"} else False,
)

__all__ = ["logfire"]
