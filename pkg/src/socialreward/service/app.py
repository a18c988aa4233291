"""HTTP front end over the fusion engine and evaluation helpers.

Each session owns one :class:`FusionEngine`; concurrent clients posting to
the same session are serialized by a per-session lock.
"""

from __future__ import annotations

import threading
import uuid
from typing import Dict, List

from fastapi import FastAPI, HTTPException

from .. import evaluation
from ..config import RunConfig
from ..core import RewardSample, normalize_unit, reward
from ..errors import SocialRewardError
from ..fusion import FusionEngine, format_sample
from ..population import IndividualReturn, InternalisationFn, internalise, population_return
from ..stream import FrameParser
from . import schemas


class _Session:
    def __init__(self, cfg: RunConfig):
        self.engine = FusionEngine(cfg.fusion, cfg.registry, cfg.taxonomy)
        self.parser = FrameParser(cfg.registry, source="http")
        self.samples: List[RewardSample] = []
        self.lock = threading.Lock()


def _sample_model(s: RewardSample) -> schemas.Sample:
    return schemas.Sample(
        tick_ms=s.tick_time,
        r_total=s.r_total,
        r_fer=s.r_fer,
        r_ser=s.r_ser,
        r_presence=s.r_presence,
        presence_fraction=s.presence,
        record=format_sample(s),
    )


def create_app(cfg: RunConfig = None) -> FastAPI:
    cfg = cfg or RunConfig.default()
    app = FastAPI(title="Social reward fusion service")
    sessions: Dict[str, _Session] = {}
    sessions_lock = threading.Lock()

    def get_session(session_id: str) -> _Session:
        with sessions_lock:
            session = sessions.get(session_id)
        if session is None:
            raise HTTPException(status_code=404, detail=f"unknown session {session_id}")
        return session

    def bad_request(exc: Exception) -> HTTPException:
        return HTTPException(status_code=422, detail=f"{type(exc).__name__}: {exc}")

    def to_records(preds: List[schemas.Prediction]) -> List[evaluation.PredictionRecord]:
        out = []
        for p in preds:
            line = f"{p.sample_id}|{p.actor_id}|{p.true_label}|{','.join(repr(float(v)) for v in p.scores)}"
            out.append(evaluation.parse_prediction(line, cfg.taxonomy, where=p.sample_id))
        return out

    @app.get("/health", response_model=schemas.Health)
    def health():
        return schemas.Health(taxonomy=list(cfg.taxonomy.labels))

    @app.get("/config", response_model=schemas.FusionSettings)
    def settings():
        f = cfg.fusion
        return schemas.FusionSettings(
            labels=list(cfg.taxonomy.labels),
            w_fer=list(f.w_fer),
            w_ser=list(f.w_ser),
            k_fer=f.k_fer,
            k_ser=f.k_ser,
            k_presence=f.k_presence,
            tick_period_ms=f.tick_period,
            fer_window_ms=f.fer_window,
            ser_window_ms=f.ser_window,
            presence_window_ms=f.presence_window,
            channels={name: spec.modality.value for name, spec in cfg.registry.channels.items()},
        )

    @app.post("/normalize", response_model=schemas.NormalizeResponse)
    def normalize(req: schemas.NormalizeRequest):
        try:
            return schemas.NormalizeResponse(values=list(normalize_unit(req.raw)))
        except SocialRewardError as exc:
            raise bad_request(exc)

    @app.post("/reward", response_model=schemas.RewardResponse)
    def compute_reward(req: schemas.RewardRequest):
        try:
            r_total, r_fer, r_ser, r_presence = reward(req.x_fer, req.x_ser, req.presence, cfg.fusion)
        except SocialRewardError as exc:
            raise bad_request(exc)
        return schemas.RewardResponse(r_total=r_total, r_fer=r_fer, r_ser=r_ser, r_presence=r_presence)

    @app.post("/sessions", response_model=schemas.SessionCreated, status_code=201)
    def create_session():
        session_id = uuid.uuid4().hex
        with sessions_lock:
            sessions[session_id] = _Session(cfg)
        return schemas.SessionCreated(session_id=session_id)

    @app.delete("/sessions/{session_id}", status_code=204)
    def delete_session(session_id: str):
        with sessions_lock:
            if sessions.pop(session_id, None) is None:
                raise HTTPException(status_code=404, detail=f"unknown session {session_id}")

    @app.post("/sessions/{session_id}/frames", response_model=schemas.FramesResponse)
    def post_frames(session_id: str, req: schemas.FramesRequest):
        session = get_session(session_id)
        with session.lock:
            before = len(session.parser.diagnostics)
            emitted: List[RewardSample] = []
            accepted = 0
            for line in req.lines:
                frame = session.parser.parse(line)
                if frame is None:
                    continue
                late = len(session.engine.diagnostics)
                emitted.extend(session.engine.ingest(frame))
                if len(session.engine.diagnostics) == late:
                    accepted += 1
            session.samples.extend(emitted)
            diags = session.parser.diagnostics[before:]
        return schemas.FramesResponse(
            accepted=accepted,
            diagnostics=[schemas.DiagnosticModel(kind=d.kind, message=d.message, line_no=d.line_no) for d in diags],
            samples=[_sample_model(s) for s in emitted],
        )

    @app.post("/sessions/{session_id}/tick", response_model=schemas.SampleList)
    def tick(session_id: str, req: schemas.TickRequest):
        session = get_session(session_id)
        with session.lock:
            if session.engine.last_tick is not None and req.now < session.engine.last_tick:
                raise HTTPException(status_code=409, detail="now precedes the last emitted tick")
            emitted = session.engine.tick(req.now)
            session.samples.extend(emitted)
        return schemas.SampleList(samples=[_sample_model(s) for s in emitted])

    @app.post("/sessions/{session_id}/finish", response_model=schemas.SampleList)
    def finish(session_id: str, req: schemas.FinishRequest):
        session = get_session(session_id)
        with session.lock:
            emitted = session.engine.finish(req.until)
            session.samples.extend(emitted)
        return schemas.SampleList(samples=[_sample_model(s) for s in emitted])

    @app.get("/sessions/{session_id}/samples", response_model=schemas.SampleList)
    def samples(session_id: str, since: int = 0):
        session = get_session(session_id)
        with session.lock:
            chosen = [s for s in session.samples if s.tick_time >= since]
        return schemas.SampleList(samples=[_sample_model(s) for s in chosen])

    @app.post("/eval/pearson", response_model=schemas.PearsonResponse)
    def eval_pearson(req: schemas.PearsonRequest):
        try:
            return schemas.PearsonResponse(r=evaluation.pearson(req.x, req.y))
        except SocialRewardError as exc:
            raise bad_request(exc)

    @app.post("/eval/model", response_model=schemas.ModelEvalResponse)
    def eval_model(req: schemas.ModelEvalRequest):
        try:
            preds = to_records(req.predictions)
            top_k = evaluation.top_k_accuracy(preds, cfg.taxonomy, req.k_max)
        except (SocialRewardError, ValueError) as exc:
            raise bad_request(exc)
        return schemas.ModelEvalResponse(
            top_k=[[k, acc] for k, acc in top_k],
            confusion_counts=evaluation.confusion_matrix(preds, cfg.taxonomy, "counts"),
            confusion_row=evaluation.confusion_matrix(preds, cfg.taxonomy, "row"),
        )

    @app.post("/eval/split", response_model=schemas.SplitResponse)
    def eval_split(req: schemas.SplitRequest):
        try:
            train, test = evaluation.split_by_actor(to_records(req.predictions), req.test_fraction, req.seed)
        except (SocialRewardError, ValueError) as exc:
            raise bad_request(exc)
        return schemas.SplitResponse(
            train_actors=sorted({p.actor_id for p in train}),
            test_actors=sorted({p.actor_id for p in test}),
            train_samples=[p.sample_id for p in train],
            test_samples=[p.sample_id for p in test],
        )

    @app.post("/population", response_model=schemas.PopulationResponse)
    def population(req: schemas.PopulationRequest):
        try:
            f = InternalisationFn.parse(req.f)
            returns = [IndividualReturn(r.individual_id, r.R) for r in req.returns]
        except SocialRewardError as exc:
            raise bad_request(exc)
        return schemas.PopulationResponse(
            rows=[schemas.PopulationRow(individual_id=r.individual_id, R=r.R, f_R=internalise(f, r.R)) for r in returns],
            total_R=sum((r.R for r in returns), 0.0),
            internalised_total=population_return(returns, f),
        )

    return app
