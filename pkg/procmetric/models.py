"""Core Pydantic models for procmetric: files, reports and configuration."""

import os
from pathlib import Path
from typing import Any, Literal

import numpy as np
import yaml
from pydantic import BaseModel, Field, model_validator

ComplexPair = tuple[float, float]
MatrixPairs = list[list[ComplexPair]]


def matrix_to_pairs(m: Any) -> MatrixPairs:
    """Row-major nested list of [re, im] pairs."""
    arr = np.asarray(m, dtype=np.complex128)
    return [[(float(z.real), float(z.imag)) for z in row] for row in arr]


def pairs_to_matrix(data: Any, dim: int | None = None) -> np.ndarray:
    """Inverse of ``matrix_to_pairs``; also accepts a flat row-major list of pairs."""
    arr = np.asarray(data, dtype=np.float64)
    if arr.ndim == 2 and arr.shape[-1] == 2:
        side = dim if dim is not None else int(round(np.sqrt(arr.shape[0])))
        arr = arr.reshape(side, -1, 2)
    if arr.ndim != 3 or arr.shape[-1] != 2:
        raise ValueError("matrix must be a list of rows of [re, im] pairs")
    if not np.all(np.isfinite(arr)):
        raise ValueError("matrix entries must be finite")
    return arr[..., 0] + 1j * arr[..., 1]


class ChannelFile(BaseModel):
    """On-disk channel: ``{"dim": d, "form": ..., "data": ...}``."""
    dim: int = Field(ge=1)
    form: Literal["kraus", "choi", "chi", "unitary"]
    data: list[Any]
    basis: Literal["matrix-units", "pauli"] | None = None
    description: str = ""

    @model_validator(mode="after")
    def check_shapes(self) -> "ChannelFile":
        if self.form == "kraus":
            if not self.data:
                raise ValueError("data: kraus form needs at least one matrix")
            for index, element in enumerate(self.data):
                if pairs_to_matrix(element, self.dim).shape != (self.dim, self.dim):
                    raise ValueError(f"data[{index}]: Kraus element must be {self.dim}x{self.dim}")
        else:
            side = self.dim if self.form == "unitary" else self.dim**2
            if pairs_to_matrix(self.data, side).shape != (side, side):
                raise ValueError(f"data: {self.form} matrix must be {side}x{side}")
        if self.form == "chi" and self.basis is None:
            raise ValueError("basis: chi form requires 'matrix-units' or 'pauli'")
        return self

    def matrices(self) -> list[np.ndarray]:
        if self.form == "kraus":
            return [pairs_to_matrix(element, self.dim) for element in self.data]
        side = self.dim if self.form == "unitary" else self.dim**2
        return [pairs_to_matrix(self.data, side)]


class OptimizerConfig(BaseModel):
    """Settings for the worst-case and stabilized optimizers."""
    max_iterations: int = Field(default=500, gt=0)
    gap_tolerance: float = Field(default=1e-7, gt=0)
    restarts: int = Field(default=8, gt=0)
    fd_step: float = Field(default=1e-5, gt=0)
    seed: int = Field(default=0, ge=0)


class OptimizerDiagnostics(BaseModel):
    value: float
    iterations: int
    final_gap: float
    converged: bool
    starts: int
    argmin_state: MatrixPairs


class MonteCarloDiagnostics(BaseModel):
    estimate: float
    stderr: float
    samples: int
    seed: int


class MeasureReport(BaseModel):
    """Every process measure for one (real, ideal) channel pair."""
    dim: int
    d_pro: float
    f_pro: float
    c_pro: float
    f_ave: float | None  # closed form, only when the ideal channel is unitary
    d_ave_mc: float
    f_ave_mc: float
    d_max: float
    f_min: float
    d_stab: float
    f_stab: float
    c_stab: float
    a_stab: float
    b_stab: float
    process_purity: float
    ideal_process_purity: float
    optimizer: dict[str, OptimizerDiagnostics]
    monte_carlo: dict[str, MonteCarloDiagnostics]
    consistency: dict[str, bool]

    @model_validator(mode="after")
    def check_c_stab(self) -> "MeasureReport":
        if abs(self.c_stab - np.sqrt(max(0.0, 1.0 - self.f_stab))) > 1e-12:
            raise ValueError("c_stab must equal sqrt(1 - f_stab)")
        return self

    def measures(self) -> dict[str, float]:
        names = [
            "d_pro", "f_pro", "c_pro", "f_ave", "d_ave_mc", "f_ave_mc", "d_max", "f_min",
            "d_stab", "f_stab", "c_stab", "a_stab", "b_stab", "process_purity", "ideal_process_purity",
        ]
        return {name: getattr(self, name) for name in names if getattr(self, name) is not None}


class PlanSetting(BaseModel):
    """One measured combination: prepare input k, measure observable l."""
    input_index: int
    observable_index: int
    input_state: MatrixPairs
    observable: MatrixPairs
    weight: ComplexPair


class PlanExport(BaseModel):
    dim: int
    scheme: Literal["general", "derived", "pauli-minimal"]
    target_unitary: MatrixPairs
    settings: list[PlanSetting]
    gram_condition: float


class EstimationReport(BaseModel):
    dim: int
    scheme: str
    settings: int
    shots_per_setting: int
    estimate: float
    stderr: float
    seed: int
    oracle: float | None = None


class BoundCheck(BaseModel):
    """lhs ≤ rhs, reported with its slack."""
    name: str
    lhs: float
    rhs: float
    slack: float
    holds: bool
    applicable: bool = True


class BoundReport(BaseModel):
    checks: list[BoundCheck]

    @property
    def all_hold(self) -> bool:
        return all(c.holds for c in self.checks if c.applicable)

    @property
    def min_slack(self) -> float:
        slacks = [c.slack for c in self.checks if c.applicable]
        return min(slacks) if slacks else float("inf")


class SuiteResult(BaseModel):
    name: str
    passed: bool
    instances: int
    worst_margin: float
    counterexample: str | None = None  # path of the dump, when one was written


class Counterexample(BaseModel):
    """Everything needed to replay one failed invariant check."""
    suite: str
    seed: int
    instance: int
    dim: int
    channels: dict[str, ChannelFile]
    detail: str = ""


class ProcmetricConfig(BaseModel):
    """Application configuration."""
    optimizer: OptimizerConfig = OptimizerConfig()
    mc_samples: int = Field(default=10_000, ge=2)
    shots: int = Field(default=0, ge=0)
    seed: int | None = None
    output_format: Literal["json", "table"] = "json"
    data_dir: str | None = None  # Custom data directory path

    @classmethod
    def load(cls, config_path: Path | None = None) -> "ProcmetricConfig":
        """Load configuration: defaults, then environment, then the YAML file."""
        optimizer = OptimizerConfig(
            max_iterations=int(os.getenv("PROCMETRIC_MAX_ITER", "500")),
            gap_tolerance=float(os.getenv("PROCMETRIC_GAP_TOL", "1e-7")),
            restarts=int(os.getenv("PROCMETRIC_RESTARTS", "8")),
        )
        seed_env = os.getenv("PROCMETRIC_SEED")
        data: dict[str, Any] = {
            "optimizer": optimizer.model_dump(),
            "mc_samples": int(os.getenv("PROCMETRIC_MC_SAMPLES", "10000")),
            "seed": int(seed_env) if seed_env else None,
            "data_dir": os.getenv("PROCMETRIC_DATA_DIR"),
        }

        # If no config_path provided, try to find it in the data directory
        if config_path is None:
            data_dir = Path(data["data_dir"]).expanduser().resolve() if data["data_dir"] else Path.cwd() / "data"
            config_path = data_dir / "procmetric.yaml"

        if config_path.exists():
            file_data = yaml.safe_load(config_path.read_text()) or {}
            if not isinstance(file_data, dict):
                raise ValueError(f"{config_path}: expected a mapping at the top level")
            file_optimizer = file_data.pop("optimizer", None) or {}
            data.update(file_data)
            data["optimizer"] = {**data["optimizer"], **file_optimizer}

        return cls.model_validate(data)
