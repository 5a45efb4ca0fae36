"""Session engine and HTTP API for interactive search.

A SearchEngine holds immutable per-dataset indexes and mutable per-session
state.  Sessions are single-writer (a lock serializes feedback per
session) and never share state; the durable form of a session is just its
constraint history plus mode, from which every derived array is rebuilt.
"""

from __future__ import annotations

import mimetypes
import os
import threading
import time
import uuid
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

import numpy as np

from .active import ExhaustedSearchError, LikelihoodModel, select_question
from .dataset import Relation
from .hybrid import BinaryFeedback, build_ordered_pairs, satisfaction_partition, train_hybrid_scorer
from .pivots import PivotSet, descend
from .relevance import (
    FeedbackConstraint,
    RankingMode,
    RelevanceState,
    SearchContext,
    rank_by_score,
    rank_images,
    rebuild_state,
    update_relevance,
)
from .active import entropy as relevance_entropy
from .validation import check_image_id

DEFAULT_PAGE_SIZE = 40
DEFAULT_SESSION_TTL = 3600.0


class SessionMode(str, Enum):
    FREE = "free"
    ACTIVE = "active"
    HYBRID = "hybrid"


class ApiError(Exception):
    def __init__(self, status: int, message: str):
        super().__init__(message)
        self.status = status
        self.message = message


@dataclass
class PendingQuestion:
    token: str
    pivot_image: int
    attribute: int


@dataclass
class Session:
    session_id: str
    dataset: str
    mode: SessionMode
    scoring: RankingMode
    seed: int
    state: RelevanceState
    pivot_set: Optional[PivotSet] = None
    binary: BinaryFeedback = field(default_factory=BinaryFeedback)
    shown_history: set[int] = field(default_factory=set)
    pending: Optional[PendingQuestion] = None
    hybrid_scores: Optional[np.ndarray] = None
    iteration: int = 0
    created: float = field(default_factory=time.time)
    updated: float = field(default_factory=time.time)
    lock: threading.Lock = field(default_factory=threading.Lock, repr=False)
    first_page: list[int] = field(default_factory=list)


def _tercile_candidates(ctx: SearchContext, keyword_filter: list[dict]) -> np.ndarray:
    """Images whose predicted values fall in the requested tercile per predicate."""
    mask = np.ones(ctx.n_images, dtype=bool)
    names = list(ctx.manifest.attribute_names)
    for pred in keyword_filter:
        attr = pred.get("attribute")
        if isinstance(attr, str):
            if attr not in names:
                raise ApiError(400, f"unknown attribute name {attr!r}")
            attr = names.index(attr)
        if not isinstance(attr, int) or not 0 <= attr < ctx.n_attributes:
            raise ApiError(400, f"invalid attribute in keyword filter: {pred!r}")
        direction = pred.get("direction", "top")
        values = ctx.attr_values[:, attr]
        lo, hi = np.percentile(values, [100 / 3, 200 / 3])
        if direction == "top":
            mask &= values >= hi
        elif direction == "bottom":
            mask &= values <= lo
        else:
            raise ApiError(400, f"direction must be 'top' or 'bottom', got {direction!r}")
    candidates = np.flatnonzero(mask)
    if candidates.size == 0:
        raise ApiError(400, "keyword filter matches no images")
    return candidates


class SearchEngine:
    def __init__(
        self,
        contexts: dict[str, SearchContext],
        likelihood: LikelihoodModel | None = None,
        session_ttl: float = DEFAULT_SESSION_TTL,
        seed: int = 0,
    ):
        self.contexts = contexts
        self.likelihood = likelihood or LikelihoodModel()
        self.session_ttl = session_ttl
        self.sessions: dict[str, Session] = {}
        self._lock = threading.Lock()
        self._rng = np.random.default_rng(seed)

    # -- session lifecycle -------------------------------------------------

    def context_for(self, dataset: str) -> SearchContext:
        if dataset not in self.contexts:
            raise ApiError(404, f"unknown dataset {dataset!r}")
        return self.contexts[dataset]

    def _session(self, session_id: str) -> Session:
        self.evict_idle()
        session = self.sessions.get(session_id)
        if session is None:
            raise ApiError(404, f"unknown session {session_id!r}")
        return session

    def evict_idle(self) -> None:
        now = time.time()
        with self._lock:
            stale = [
                sid for sid, s in self.sessions.items() if now - s.updated > self.session_ttl
            ]
            for sid in stale:
                del self.sessions[sid]

    def create_session(
        self,
        dataset: str,
        mode: str,
        keyword_filter: Optional[list[dict]] = None,
        seed: Optional[int] = None,
        page_size: int = DEFAULT_PAGE_SIZE,
        scoring: Optional[str] = None,
    ) -> dict:
        ctx = self.context_for(dataset)
        try:
            mode_enum = SessionMode(mode)
        except ValueError:
            raise ApiError(400, f"unknown mode {mode!r}") from None
        if scoring is None:
            default_scoring = (
                RankingMode.PROBABILISTIC if mode_enum is SessionMode.ACTIVE else RankingMode.COUNTING
            )
        else:
            try:
                default_scoring = RankingMode(scoring)
            except ValueError:
                raise ApiError(400, f"unknown scoring mode {scoring!r}") from None
        if seed is None:
            with self._lock:
                seed = int(self._rng.integers(2**31))
        session = Session(
            session_id=uuid.uuid4().hex,
            dataset=dataset,
            mode=mode_enum,
            scoring=default_scoring,
            seed=int(seed),
            state=RelevanceState(ctx.n_images),
        )
        rng = np.random.default_rng(session.seed)
        question = None
        if mode_enum is SessionMode.ACTIVE:
            session.pivot_set = PivotSet.at_roots(ctx.trees)
            question = self._next_question(ctx, session)
            page_ids = [int(v) for v in rank_images(session.state, session.scoring)[:page_size]]
        else:
            if keyword_filter:
                candidates = _tercile_candidates(ctx, keyword_filter)
            else:
                candidates = np.arange(ctx.n_images)
            take = min(page_size, candidates.size)
            page_ids = [int(v) for v in rng.choice(candidates, size=take, replace=False)]
        session.first_page = page_ids
        session.shown_history.update(page_ids)
        if question is not None:
            session.shown_history.add(question["pivot_image"])
        with self._lock:
            self.sessions[session.session_id] = session
        return {
            "session_id": session.session_id,
            "page": self._page_items(ctx, session, page_ids),
            "question": question,
        }

    def _next_question(self, ctx: SearchContext, session: Session) -> Optional[dict]:
        try:
            candidate = select_question(ctx, session.pivot_set, self.likelihood, session.state)
        except ExhaustedSearchError:
            session.pending = None
            return None
        session.pending = PendingQuestion(
            token=uuid.uuid4().hex,
            pivot_image=candidate.pivot_image,
            attribute=candidate.attribute,
        )
        session.shown_history.add(candidate.pivot_image)
        return {
            "question_token": session.pending.token,
            "pivot_image": candidate.pivot_image,
            "attribute": candidate.attribute,
            "attribute_name": ctx.manifest.attribute_names[candidate.attribute],
            "expected_entropy": candidate.expected_entropy,
        }

    # -- ranking -----------------------------------------------------------

    def _ranking(self, ctx: SearchContext, session: Session) -> np.ndarray:
        if session.mode is SessionMode.HYBRID and session.hybrid_scores is not None:
            return rank_by_score(session.hybrid_scores)
        return rank_images(session.state, session.scoring)

    def _score_of(self, ctx: SearchContext, session: Session, image_id: int) -> float:
        if session.mode is SessionMode.HYBRID and session.hybrid_scores is not None:
            return float(session.hybrid_scores[image_id])
        if session.scoring is RankingMode.COUNTING:
            return float(session.state.satisfied_counts[image_id])
        return float(np.exp(session.state.log_relevance[image_id]))

    def _page_items(self, ctx: SearchContext, session: Session, ids: list[int]) -> list[dict]:
        names = ctx.manifest.attribute_names
        items = []
        for i in ids:
            rec = ctx.manifest.images[i]
            items.append(
                {
                    "id": int(i),
                    "asset_path": rec.asset_path,
                    "score": self._score_of(ctx, session, i),
                    "satisfied_count": int(session.state.satisfied_counts[i]),
                    "attribute_values": {
                        name: float(ctx.attr_values[i, m]) for m, name in enumerate(names)
                    },
                }
            )
        return items

    # -- feedback ----------------------------------------------------------

    def _parse_statement(self, ctx: SearchContext, session: Session, raw: dict) -> FeedbackConstraint:
        try:
            ref = int(raw["ref_id"])
            attribute = raw["attribute"]
            response = Relation(raw["response"])
        except (KeyError, TypeError, ValueError) as exc:
            raise ApiError(400, f"malformed statement {raw!r}") from exc
        if isinstance(attribute, str):
            names = list(ctx.manifest.attribute_names)
            if attribute not in names:
                raise ApiError(400, f"unknown attribute name {attribute!r}")
            attribute = names.index(attribute)
        attribute = int(attribute)
        if not 0 <= attribute < ctx.n_attributes:
            raise ApiError(400, f"attribute index {attribute} out of range")
        try:
            check_image_id(ref, ctx.n_images)
        except ValueError as exc:
            raise ApiError(400, str(exc)) from exc
        if ref not in session.shown_history:
            raise ApiError(400, f"reference {ref} was not shown to this session")
        confidence = int(raw.get("confidence", 2))
        if confidence not in (1, 2, 3):
            raise ApiError(400, f"confidence must be 1, 2 or 3, got {confidence}")
        return FeedbackConstraint(
            ref_image=ref,
            attribute=attribute,
            response=response,
            weight=2.0 if confidence == 3 else 1.0,
        )

    def submit_feedback(self, session_id: str, payload: dict) -> dict:
        session = self._session(session_id)
        ctx = self.context_for(session.dataset)
        with session.lock:
            question = None
            if session.mode is SessionMode.ACTIVE:
                if session.pending is None:
                    raise ApiError(409, "session is exhausted; no pending question")
                token = payload.get("question_token")
                if token != session.pending.token:
                    raise ApiError(409, "stale or duplicate question token")
                try:
                    response = Relation(payload["response"])
                except (KeyError, ValueError) as exc:
                    raise ApiError(400, "payload must carry response more/less/equal") from exc
                confidence = int(payload.get("confidence", 2))
                if confidence not in (1, 2, 3):
                    raise ApiError(400, f"confidence must be 1, 2 or 3, got {confidence}")
                constraint = FeedbackConstraint(
                    ref_image=session.pending.pivot_image,
                    attribute=session.pending.attribute,
                    response=response,
                    weight=2.0 if confidence == 3 else 1.0,
                )
                session.state = update_relevance(ctx, session.state, constraint)
                session.pivot_set = descend(session.pivot_set, constraint.attribute, response)
                question = self._next_question(ctx, session)
            else:
                statements = payload.get("statements", [])
                if not isinstance(statements, list):
                    raise ApiError(400, "statements must be a list")
                constraints = [self._parse_statement(ctx, session, raw) for raw in statements]
                if session.mode is SessionMode.FREE and not constraints:
                    raise ApiError(400, "no statements supplied")
                for c in constraints:
                    session.state = update_relevance(ctx, session.state, c)
                if session.mode is SessionMode.HYBRID:
                    self._apply_binary(ctx, session, payload)
                    self._retrain_hybrid(ctx, session)
            session.iteration += 1
            session.updated = time.time()
            page_size = int(payload.get("page_size", DEFAULT_PAGE_SIZE))
            ranking = self._ranking(ctx, session)
            page_ids = [int(v) for v in ranking[:page_size]]
            session.shown_history.update(page_ids)
            return {
                "page": self._page_items(ctx, session, page_ids),
                "question": question,
                "entropy": relevance_entropy(session.state),
                "iteration": session.iteration,
            }

    def _apply_binary(self, ctx: SearchContext, session: Session, payload: dict) -> None:
        relevant = payload.get("relevant", [])
        irrelevant = payload.get("irrelevant", [])
        for group, target in ((relevant, session.binary.relevant), (irrelevant, session.binary.irrelevant)):
            if not isinstance(group, list):
                raise ApiError(400, "relevant/irrelevant must be id lists")
            for raw in group:
                try:
                    i = check_image_id(int(raw), ctx.n_images)
                except (TypeError, ValueError) as exc:
                    raise ApiError(400, f"bad image id {raw!r}") from exc
                if i not in session.shown_history:
                    raise ApiError(400, f"reference {i} was not shown to this session")
                target.add(i)
        overlap = session.binary.relevant & session.binary.irrelevant
        if overlap:
            raise ApiError(400, f"images marked both relevant and irrelevant: {sorted(overlap)}")

    def _retrain_hybrid(self, ctx: SearchContext, session: Session) -> None:
        if not (session.binary.relevant or session.binary.irrelevant):
            return
        partition = satisfaction_partition(ctx, session.state.history)
        try:
            pairs, weights = build_ordered_pairs(
                session.binary, partition, seed=session.seed
            )
        except ValueError:
            return
        w = train_hybrid_scorer(pairs, weights, ctx.features)
        session.hybrid_scores = ctx.features @ w

    # -- results -----------------------------------------------------------

    def get_results(self, session_id: str, page: int = 0, page_size: int = DEFAULT_PAGE_SIZE) -> dict:
        session = self._session(session_id)
        ctx = self.context_for(session.dataset)
        if page < 0 or page_size < 1:
            raise ApiError(400, "page must be >= 0 and page_size >= 1")
        with session.lock:
            ranking = self._ranking(ctx, session)
            start = page * page_size
            if start >= len(ranking):
                raise ApiError(400, f"page {page} is beyond the {len(ranking)}-image ranking")
            ids = [int(v) for v in ranking[start : start + page_size]]
            session.shown_history.update(ids)
            session.updated = time.time()
            return {
                "items": self._page_items(ctx, session, ids),
                "page": page,
                "page_size": page_size,
                "total": int(len(ranking)),
            }

    # -- persistence -------------------------------------------------------

    def snapshot(self) -> dict:
        """Durable form: constraint history and mode only; arrays rebuild on load."""
        with self._lock:
            sessions = list(self.sessions.values())
        out = []
        for s in sessions:
            out.append(
                {
                    "session_id": s.session_id,
                    "dataset": s.dataset,
                    "mode": s.mode.value,
                    "scoring": s.scoring.value,
                    "seed": s.seed,
                    "iteration": s.iteration,
                    "created": s.created,
                    "updated": s.updated,
                    "shown_history": sorted(s.shown_history),
                    "relevant": sorted(s.binary.relevant),
                    "irrelevant": sorted(s.binary.irrelevant),
                    "history": [
                        {
                            "ref_image": c.ref_image,
                            "attribute": c.attribute,
                            "response": c.response.value,
                            "weight": c.weight,
                        }
                        for c in s.state.history
                    ],
                }
            )
        return {"sessions": out}

    def restore(self, snapshot: dict) -> None:
        for raw in snapshot.get("sessions", []):
            ctx = self.context_for(raw["dataset"])
            history = tuple(
                FeedbackConstraint(
                    ref_image=int(c["ref_image"]),
                    attribute=int(c["attribute"]),
                    response=Relation(c["response"]),
                    weight=float(c["weight"]),
                )
                for c in raw["history"]
            )
            session = Session(
                session_id=raw["session_id"],
                dataset=raw["dataset"],
                mode=SessionMode(raw["mode"]),
                scoring=RankingMode(raw["scoring"]),
                seed=int(raw["seed"]),
                state=rebuild_state(ctx, history),
                iteration=int(raw.get("iteration", len(history))),
                created=float(raw.get("created", time.time())),
                updated=time.time(),
            )
            session.shown_history = set(int(v) for v in raw.get("shown_history", []))
            session.binary = BinaryFeedback(
                relevant=set(int(v) for v in raw.get("relevant", [])),
                irrelevant=set(int(v) for v in raw.get("irrelevant", [])),
            )
            if session.mode is SessionMode.ACTIVE:
                pivot_set = PivotSet.at_roots(ctx.trees)
                for c in history:
                    node = pivot_set.cursors[c.attribute]
                    if node is not None and node.pivot_image == c.ref_image:
                        pivot_set = descend(pivot_set, c.attribute, c.response)
                session.pivot_set = pivot_set
                self._next_question(ctx, session)
            if session.mode is SessionMode.HYBRID:
                self._retrain_hybrid(ctx, session)
            with self._lock:
                self.sessions[session.session_id] = session


def create_app(engine: SearchEngine):
    """FastAPI application exposing the v1 API over a SearchEngine."""
    from fastapi import FastAPI, Request
    from fastapi.responses import FileResponse, JSONResponse

    app = FastAPI(title="whittle search service")

    @app.exception_handler(ApiError)
    async def handle_api_error(request: Request, exc: ApiError):
        return JSONResponse(status_code=exc.status, content={"error": exc.message})

    @app.get("/v1/healthz")
    def healthz():
        return {"status": "ok"}

    @app.get("/v1/datasets")
    def datasets():
        return {
            "datasets": [
                {
                    "name": name,
                    "N": ctx.n_images,
                    "M": ctx.n_attributes,
                    "attribute_names": list(ctx.manifest.attribute_names),
                }
                for name, ctx in engine.contexts.items()
            ]
        }

    @app.post("/v1/sessions")
    def create_session(payload: dict):
        if "dataset" not in payload or "mode" not in payload:
            raise ApiError(400, "payload must carry dataset and mode")
        return engine.create_session(
            dataset=payload["dataset"],
            mode=payload["mode"],
            keyword_filter=payload.get("keyword_filter"),
            seed=payload.get("seed"),
            page_size=int(payload.get("page_size", DEFAULT_PAGE_SIZE)),
            scoring=payload.get("scoring"),
        )

    @app.post("/v1/sessions/{session_id}/feedback")
    def submit_feedback(session_id: str, payload: dict):
        return engine.submit_feedback(session_id, payload)

    @app.get("/v1/sessions/{session_id}/results")
    def get_results(session_id: str, page: int = 0, page_size: int = DEFAULT_PAGE_SIZE):
        return engine.get_results(session_id, page=page, page_size=page_size)

    @app.get("/v1/images/{dataset}/{image_id}")
    def get_image(dataset: str, image_id: int):
        ctx = engine.context_for(dataset)
        try:
            check_image_id(image_id, ctx.n_images)
        except ValueError as exc:
            raise ApiError(404, str(exc)) from exc
        rec = ctx.manifest.images[image_id]
        if rec.asset_path is None:
            raise ApiError(404, f"image {image_id} has no display asset")
        root = os.environ.get("WHITTLE_DATA_DIR", ".")
        path = os.path.join(root, rec.asset_path)
        if not os.path.isfile(path):
            raise ApiError(404, f"asset file not found: {rec.asset_path}")
        media_type = mimetypes.guess_type(path)[0] or "application/octet-stream"
        return FileResponse(path, media_type=media_type)

    return app
