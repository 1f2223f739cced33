"""HTTP service wrapping the experiment harness.

The service exposes the three scenarios behind a single experiment
endpoint; the CLI is a thin client of this app (in-process by default).
"""

from __future__ import annotations

from typing import Literal

from fastapi import FastAPI, HTTPException
from pydantic import BaseModel as _BaseModel
from pydantic import ConfigDict, Field


class BaseModel(_BaseModel):
    """Request models reject unknown fields so configuration typos fail
    loudly instead of running a default experiment."""

    model_config = ConfigDict(extra="forbid")

from .errors import ArtifactError, ConfigError
from .harness import build_config, records_to_csv, run_experiment

__all__ = ["app", "ExperimentRequest", "ExperimentResponse", "RecordModel"]


class OfdmModel(BaseModel):
    n_subcarriers: int = 1024
    cp_len: int = 8
    qam_order: int = 16


class EstimatorModel(BaseModel):
    alpha: float = 0.01
    n_iter: int = 30
    q_count: int = 6
    n_dct: int = 512
    taps: int = 3
    prior_strength: float = 0.0015
    shape_projection: bool = True


class InverseModel(BaseModel):
    q: int = 512
    n_dct: int = 512
    samples: int = 10000
    alpha: float = 0.01
    epochs: int = 60


class DetectorModel(BaseModel):
    method: Literal["predistortion", "iterative"] = "predistortion"
    n_iter: int = 5
    inverse: InverseModel = Field(default_factory=InverseModel)


class ExperimentRequest(BaseModel):
    scenario: Literal["estimate", "ber", "inverse"]
    nonlinearity: str = "soft"
    est_snr_db: float = 0.0
    det_snr_grid_db: list[float] = [0.0, 5.0, 10.0, 15.0, 20.0, 25.0]
    trials: int = 20
    master_seed: int = 0
    min_bits_per_point: int = 100000
    workers: int = 1
    ofdm: OfdmModel = Field(default_factory=OfdmModel)
    estimator: EstimatorModel = Field(default_factory=EstimatorModel)
    detector: DetectorModel = Field(default_factory=DetectorModel)

    def flatten(self) -> dict[str, object]:
        """Dotted-key view consumed by the harness config builder."""
        flat: dict[str, object] = {
            "scenario": self.scenario,
            "nonlinearity": self.nonlinearity,
            "est_snr_db": self.est_snr_db,
            "det_snr_grid_db": ",".join(repr(v) for v in self.det_snr_grid_db),
            "trials": self.trials,
            "master_seed": self.master_seed,
            "min_bits_per_point": self.min_bits_per_point,
            "workers": self.workers,
        }
        for prefix, model in (
            ("ofdm", self.ofdm),
            ("estimator", self.estimator),
            ("detector", self.detector),
        ):
            for key, value in model.model_dump().items():
                if isinstance(value, dict):
                    for inner_key, inner_value in value.items():
                        flat[f"{prefix}.{key}.{inner_key}"] = inner_value
                else:
                    flat[f"{prefix}.{key}"] = value
        return flat


class RecordModel(BaseModel):
    scenario: str
    nonlinearity: str
    est_snr_db: float
    det_snr_db: float
    method: str
    trial: int
    seed: int
    metric_name: str
    metric_value: float | str


class ExperimentResponse(BaseModel):
    records: list[RecordModel]
    csv: str


app = FastAPI(title="nonlinear-ofdm-identification", version="0.1.0")


@app.get("/health")
def health() -> dict[str, str]:
    return {"status": "ok"}


@app.post("/experiments", response_model=ExperimentResponse)
def experiments(request: ExperimentRequest) -> ExperimentResponse:
    try:
        cfg = build_config(request.flatten())
        records = run_experiment(cfg)
    except ConfigError as exc:
        raise HTTPException(status_code=422, detail=str(exc)) from exc
    except ArtifactError as exc:
        raise HTTPException(status_code=500, detail=str(exc)) from exc
    return ExperimentResponse(
        records=[
            RecordModel(
                scenario=r.scenario,
                nonlinearity=r.nonlinearity,
                est_snr_db=r.est_snr_db,
                det_snr_db=r.det_snr_db,
                method=r.method,
                trial=r.trial,
                seed=r.seed,
                metric_name=r.metric_name,
                metric_value=r.metric_value,
            )
            for r in records
        ],
        csv=records_to_csv(records),
    )
