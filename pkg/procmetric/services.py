"""Service layer for channel files, reports and counterexample dumps."""

import json
from datetime import datetime
from pathlib import Path

from pydantic import BaseModel, ValidationError

from .channels import Channel, from_file, to_file
from .errors import InvalidChannelFile
from .file_operations import FileOperations
from .filename_utils import generate_counterexample_filename, generate_report_filename
from .models import ChannelFile, Counterexample


class ChannelStore:
    """Handles all file operations for procmetric."""

    def __init__(self, workspace_path: Path, data_dir: str | None = None):
        self.fs = FileOperations(workspace_path, data_dir)
        self.workspace_path = workspace_path
        self.data_path = self.fs.data_path

    @property
    def reports_path(self) -> Path:
        return self.fs.get_data_path("reports")

    @property
    def counterexamples_path(self) -> Path:
        return self.fs.get_data_path("counterexamples")

    def load_channel_file(self, path: Path) -> ChannelFile:
        """Parse a channel JSON file; any failure names the file and the offending field."""
        try:
            data = self.fs.read_json(path)
        except FileNotFoundError as exc:
            raise InvalidChannelFile(f"{path}: file not found") from exc
        except json.JSONDecodeError as exc:
            raise InvalidChannelFile(f"{path}: malformed JSON at line {exc.lineno}: {exc.msg}") from exc
        try:
            return ChannelFile.model_validate(data)
        except ValidationError as exc:
            first = exc.errors()[0]
            field = ".".join(str(part) for part in first["loc"]) or "<root>"
            raise InvalidChannelFile(f"{path}: field '{field}': {first['msg']}") from exc

    def load_channel(self, path: Path) -> Channel:
        return from_file(self.load_channel_file(path))

    def save_channel(self, path: Path, channel: Channel, description: str = "") -> None:
        self.save_channel_file(path, to_file(channel, description=description))

    def save_channel_file(self, path: Path, channel_file: ChannelFile) -> None:
        self.fs.write_text(path, channel_file.model_dump_json(indent=2, exclude_none=True))

    def save_report(self, report: BaseModel, ideal_path: Path, real_path: Path, timestamp: datetime | None = None) -> Path:
        """Write a report under data/reports and return its path."""
        path = self.reports_path / generate_report_filename(ideal_path, real_path, timestamp)
        self.fs.write_text(path, report.model_dump_json(indent=2))
        return path

    def dump_counterexample(self, counterexample: Counterexample) -> Path:
        name = generate_counterexample_filename(counterexample.suite, counterexample.seed, counterexample.instance)
        path = self.counterexamples_path / name
        self.fs.write_text(path, counterexample.model_dump_json(indent=2))
        return path

    def load_counterexample(self, path: Path) -> Counterexample:
        try:
            return Counterexample.model_validate_json(path.read_text(encoding="utf-8"))
        except (OSError, ValidationError) as exc:
            raise InvalidChannelFile(f"{path}: not a counterexample dump: {exc}") from exc
