"""Referral queue, human oracle, and the HTTP labeling service.

Queue mutations are serialised through one lock; the AL loop is the sole
consumer of completed batches.  The HTTP layer is a thin FastAPI app over the
queue plus a shared status board the loop updates each iteration.
"""

import threading
import time
from dataclasses import dataclass, field

from fastapi import FastAPI
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from .errors import OracleError, ValidationError
from .mc import posterior_histogram

QUEUE_STATUSES = ("pending", "labelled", "expired")


class ConflictError(ValidationError):
    """Sample is not pending; a label is already recorded or it expired."""


class NotFoundError(ValidationError):
    """Unknown sample id."""


@dataclass
class QueueItem:
    sample_id: int
    payload: list
    mu: list
    sigma: list
    scalar_uncertainty: float
    histogram: dict
    enqueue_iteration: int
    status: str = "pending"
    label: int = None
    annotator_id: str = None
    submitted_at: float = None

    @classmethod
    def from_summary(cls, summary, payload, iteration, bins=10):
        counts, edges = posterior_histogram(summary, bins=bins)
        return cls(
            sample_id=summary.sample_id,
            payload=list(payload),
            mu=summary.mu.tolist(),
            sigma=summary.sigma.tolist(),
            scalar_uncertainty=summary.scalar_uncertainty,
            histogram={"counts": counts.tolist(), "edges": edges.tolist()},
            enqueue_iteration=iteration,
        )

    def to_dict(self):
        return {
            "sample_id": self.sample_id,
            "payload": self.payload,
            "mu": self.mu,
            "sigma": self.sigma,
            "scalar_uncertainty": self.scalar_uncertainty,
            "histogram": self.histogram,
            "enqueue_iteration": self.enqueue_iteration,
            "status": self.status,
            "label": self.label,
            "annotator_id": self.annotator_id,
        }


class LabelQueue:
    """Thread-safe referral queue ordered by uncertainty.

    One writer lock serialises every mutation; a batch-completion event lets
    the AL loop park until the expert has labelled all pending items.
    """

    def __init__(self, num_classes):
        self.num_classes = num_classes
        self._items = {}
        self._lock = threading.Lock()
        self._batch_ids = set()
        self._batch_done = threading.Event()

    def enqueue_batch(self, items):
        with self._lock:
            for item in items:
                existing = self._items.get(item.sample_id)
                if existing is not None and existing.status == "pending":
                    raise ValidationError(
                        f"sample {item.sample_id} is already pending"
                    )
                self._items[item.sample_id] = item
            self._batch_ids = {item.sample_id for item in items}
            self._batch_done.clear()
            if not self._batch_ids:
                self._batch_done.set()

    def pending(self, limit=None):
        with self._lock:
            items = [i for i in self._items.values() if i.status == "pending"]
        items.sort(key=lambda i: (-i.scalar_uncertainty, i.sample_id))
        return items if limit is None else items[:limit]

    def get(self, sample_id):
        with self._lock:
            item = self._items.get(int(sample_id))
        if item is None:
            raise NotFoundError(f"unknown sample {sample_id}")
        return item

    def submit(self, sample_id, label, annotator_id="anonymous"):
        """First valid submission wins; anything later conflicts."""
        sample_id = int(sample_id)
        with self._lock:
            item = self._items.get(sample_id)
            if item is None:
                raise NotFoundError(f"unknown sample {sample_id}")
            if item.status != "pending":
                raise ConflictError(
                    f"sample {sample_id} is {item.status}, not pending"
                )
            if not 0 <= int(label) < self.num_classes:
                raise ValidationError(
                    f"label must be in [0, {self.num_classes - 1}], got {label}"
                )
            item.status = "labelled"
            item.label = int(label)
            item.annotator_id = str(annotator_id)
            item.submitted_at = time.time()
            if self._batch_ids and all(
                self._items[i].status == "labelled" for i in self._batch_ids
            ):
                self._batch_done.set()
        return item

    def wait_batch(self, timeout):
        """Block until the current batch is fully labelled.

        On timeout the remaining pending items expire and OracleError is
        raised, so the caller can abandon the step without mutating AL state.
        """
        if not self._batch_done.wait(timeout=timeout):
            with self._lock:
                for sid in self._batch_ids:
                    item = self._items[sid]
                    if item.status == "pending":
                        item.status = "expired"
            raise OracleError(f"labeling batch timed out after {timeout}s")
        with self._lock:
            return {sid: self._items[sid].label for sid in self._batch_ids}

    def counts(self):
        with self._lock:
            out = {status: 0 for status in QUEUE_STATUSES}
            for item in self._items.values():
                out[item.status] += 1
            return out


class HumanOracle:
    """Oracle that parks on the labeling queue until the batch is done."""

    def __init__(self, queue: LabelQueue, timeout=24 * 3600.0, histogram_bins=10):
        self.queue = queue
        self.timeout = timeout
        self.histogram_bins = histogram_bins
        self._labels = {}

    def begin_batch(self, summaries, payloads, iteration):
        items = [
            QueueItem.from_summary(s, payload, iteration,
                                   bins=self.histogram_bins)
            for s, payload in zip(summaries, payloads)
        ]
        self.queue.enqueue_batch(items)
        self._labels = self.queue.wait_batch(self.timeout)

    def label(self, sample_id):
        try:
            return self._labels[int(sample_id)]
        except KeyError:
            raise OracleError(
                f"sample {sample_id} was not part of the labelled batch"
            ) from None

    def end_batch(self):
        self._labels = {}


@dataclass
class StatusBoard:
    """Loop progress shared with the HTTP layer."""

    iteration: int = 0
    labelled_fraction: float = 0.0
    validation_accuracy: float = None
    run_state: str = "idle"
    stop_reason: str = None
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    def update(self, **kwargs):
        with self._lock:
            for k, v in kwargs.items():
                setattr(self, k, v)

    def snapshot(self):
        with self._lock:
            return {
                "iteration": self.iteration,
                "labelled_fraction": self.labelled_fraction,
                "validation_accuracy": self.validation_accuracy,
                "run_state": self.run_state,
                "stop_reason": self.stop_reason,
            }


class LabelBody(BaseModel):
    sample_id: int
    label: int
    annotator_id: str = "anonymous"


def build_app(queue: LabelQueue, status: StatusBoard = None) -> FastAPI:
    app = FastAPI(title="mcdrop labeling service")
    status = status or StatusBoard()

    @app.exception_handler(RequestValidationError)
    async def malformed_body(request, exc):
        return JSONResponse(status_code=400,
                            content={"error": "malformed request",
                                     "detail": exc.errors()})

    @app.get("/queue")
    def get_queue(limit: int = None):
        items = queue.pending(limit=limit)
        return [i.to_dict() for i in items]

    @app.get("/samples/{sample_id}")
    def get_sample(sample_id: int):
        try:
            return queue.get(sample_id).to_dict()
        except NotFoundError as exc:
            return JSONResponse(status_code=404, content={"error": str(exc)})

    @app.post("/labels")
    def post_label(body: LabelBody):
        try:
            item = queue.submit(body.sample_id, body.label, body.annotator_id)
        except NotFoundError as exc:
            return JSONResponse(status_code=404, content={"error": str(exc)})
        except ConflictError as exc:
            return JSONResponse(status_code=409, content={"error": str(exc)})
        except ValidationError as exc:
            return JSONResponse(status_code=400, content={"error": str(exc)})
        pending = queue.counts()["pending"]
        return {"status": "labelled", "sample_id": item.sample_id,
                "pending_remaining": pending}

    @app.get("/status")
    def get_status():
        board = status.snapshot()
        board["queue"] = queue.counts()
        return board

    return app
