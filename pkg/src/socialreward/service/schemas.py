"""Request and response models for the HTTP service."""

from typing import Dict, List, Optional

from pydantic import BaseModel, Field


class Health(BaseModel):
    status: str = "ok"
    taxonomy: List[str]


class FusionSettings(BaseModel):
    labels: List[str]
    w_fer: List[float]
    w_ser: List[float]
    k_fer: float
    k_ser: float
    k_presence: float
    tick_period_ms: int
    fer_window_ms: int
    ser_window_ms: int
    presence_window_ms: int
    channels: Dict[str, str]


class NormalizeRequest(BaseModel):
    raw: List[float]


class NormalizeResponse(BaseModel):
    values: List[float]


class RewardRequest(BaseModel):
    x_fer: Optional[List[float]] = None
    x_ser: Optional[List[float]] = None
    presence: float = Field(0.0, ge=0.0, le=1.0)


class RewardResponse(BaseModel):
    r_total: float
    r_fer: float
    r_ser: float
    r_presence: float


class Sample(BaseModel):
    tick_ms: int
    r_total: float
    r_fer: float
    r_ser: float
    r_presence: float
    presence_fraction: float
    record: str  # the same sample as one .srfr line


class DiagnosticModel(BaseModel):
    kind: str
    message: str
    line_no: Optional[int] = None


class SessionCreated(BaseModel):
    session_id: str


class FramesRequest(BaseModel):
    lines: List[str] = Field(..., description="wire-format frame lines, in stream order")


class FramesResponse(BaseModel):
    accepted: int
    diagnostics: List[DiagnosticModel]
    samples: List[Sample]


class TickRequest(BaseModel):
    now: int


class FinishRequest(BaseModel):
    until: Optional[int] = None


class SampleList(BaseModel):
    samples: List[Sample]


class PearsonRequest(BaseModel):
    x: List[float]
    y: List[float]


class PearsonResponse(BaseModel):
    r: float


class Prediction(BaseModel):
    sample_id: str
    actor_id: str
    true_label: str
    scores: List[float]


class ModelEvalRequest(BaseModel):
    predictions: List[Prediction]
    k_max: Optional[int] = None


class ModelEvalResponse(BaseModel):
    top_k: List[List[float]]  # [k, accuracy] pairs
    confusion_counts: List[List[int]]
    confusion_row: List[List[float]]


class SplitRequest(BaseModel):
    predictions: List[Prediction]
    test_fraction: float = Field(0.25, gt=0.0, lt=1.0)
    seed: int = 0


class SplitResponse(BaseModel):
    train_actors: List[str]
    test_actors: List[str]
    train_samples: List[str]
    test_samples: List[str]


class IndividualReturnModel(BaseModel):
    individual_id: str
    R: float


class PopulationRequest(BaseModel):
    returns: List[IndividualReturnModel]
    f: str = "identity"


class PopulationRow(BaseModel):
    individual_id: str
    R: float
    f_R: float


class PopulationResponse(BaseModel):
    rows: List[PopulationRow]
    total_R: float
    internalised_total: float
