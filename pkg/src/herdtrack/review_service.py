"""HTTP backend for the manual review steps: first-frame target selection,
dataset cleansing, and frame-by-frame verdicts for evaluation.

Sessions are append-only JSONL journals under the state directory; every
mutation is flushed and fsynced before it is acknowledged, and reopening a
session replays its journal, so acknowledged edits survive a crash.
Mutations carry the session revision they were based on; a stale revision
is rejected with 409 rather than merged.  Errors use problem-JSON bodies
{status, title, detail}.
"""

import io
import json
import os
import threading
from pathlib import Path

from fastapi import FastAPI, Request, Response
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from pydantic import BaseModel
from starlette.exceptions import HTTPException as StarletteHTTPException

from .bootstrap import load_csv, cleanse, render_csv
from .errors import PipelineError
from .imaging import load_sequence, render_overlay
from .providers import FileEdgeProvider, FileMaskProvider, GradientEdgeProvider
from .segmentation import SegmentationConfig, segment_frame

VERDICTS = ("target", "not_target", "missed")


class Problem(Exception):
    def __init__(self, status: int, title: str, detail: str):
        super().__init__(detail)
        self.status = status
        self.title = title
        self.detail = detail


def _problem_response(status: int, title: str, detail: str) -> JSONResponse:
    return JSONResponse(
        status_code=status,
        content={"status": status, "title": title, "detail": detail},
    )


class TargetBody(BaseModel):
    frame: int
    instance: int
    revision: int


class FlagsBody(BaseModel):
    rows: list
    revision: int


class TruthBody(BaseModel):
    frame: int
    instance: int = -1
    verdict: str
    revision: int


class Session:
    """Review state reconstructed from (and persisted to) one journal file."""

    def __init__(self, session_id: str, path: Path):
        self.id = session_id
        self.path = path
        self.revision = 0
        self.target = None  # {"frame": f, "instance": i}
        self.flags = set()  # {(frame, instance), ...}
        self.truth = {}  # (frame, instance) -> verdict
        if path.is_file():
            with open(path, "r", encoding="utf-8") as fh:
                for line in fh:
                    line = line.strip()
                    if not line:
                        continue
                    entry = json.loads(line)
                    self._apply(entry["op"], entry["data"])
                    self.revision = entry["revision"]

    def _apply(self, op: str, data: dict) -> None:
        if op == "target":
            self.target = {"frame": data["frame"], "instance": data["instance"]}
        elif op == "flags":
            self.flags.update((f, i) for f, i in data["rows"])
        elif op == "truth":
            self.truth[(data["frame"], data["instance"])] = data["verdict"]
        else:
            raise Problem(500, "corrupt journal", f"unknown op {op!r}")

    def record(self, op: str, data: dict) -> int:
        """Journal the mutation durably, then apply it."""
        entry = {"revision": self.revision + 1, "op": op, "data": data}
        with open(self.path, "a", encoding="utf-8", newline="\n") as fh:
            fh.write(json.dumps(entry) + "\n")
            fh.flush()
            os.fsync(fh.fileno())
        self._apply(op, data)
        self.revision += 1
        return self.revision

    def state(self) -> dict:
        return {
            "id": self.id,
            "revision": self.revision,
            "target": self.target,
            "flags": sorted(list(pair) for pair in self.flags),
            "truth": [
                {"frame": f, "instance": i, "verdict": v}
                for (f, i), v in sorted(self.truth.items())
            ],
        }


class SessionStore:
    def __init__(self, state_dir: Path):
        self.directory = Path(state_dir) / "sessions"
        self.directory.mkdir(parents=True, exist_ok=True)
        self._sessions = {}
        self._locks = {}
        self._guard = threading.Lock()

    def lock(self, session_id: str) -> threading.Lock:
        with self._guard:
            return self._locks.setdefault(session_id, threading.Lock())

    def get(self, session_id: str) -> Session:
        if not session_id.replace("-", "").replace("_", "").isalnum():
            raise Problem(400, "bad session id", f"invalid id {session_id!r}")
        with self._guard:
            if session_id not in self._sessions:
                self._sessions[session_id] = Session(
                    session_id, self.directory / f"{session_id}.jsonl"
                )
            return self._sessions[session_id]


def build_app(
    frames_dir,
    masks_dir,
    edges_dir=None,
    dataset_path=None,
    state_dir="review_state",
    stride: int = 1,
    seed: int = 0,
    min_area: int = 800,
) -> FastAPI:
    """Assemble the service around one sequence and one optional dataset."""
    seq = load_sequence(frames_dir, stride=stride)
    name = Path(frames_dir).resolve().parent.name or "sequence"
    frames_by_id = {fid: frame for fid, frame in seq}
    mask_provider = FileMaskProvider(masks_dir)
    if edges_dir is None:
        edge_provider = GradientEdgeProvider()
    else:
        edge_provider = FileEdgeProvider(edges_dir, fallback=GradientEdgeProvider())
    seg_config = SegmentationConfig(
        min_blob_area=min_area, min_instance_area=min_area
    )
    dataset = load_csv(dataset_path) if dataset_path else None
    store = SessionStore(Path(state_dir))
    instance_cache = {}
    cache_lock = threading.Lock()

    def instances_for(frame_id: int):
        if frame_id not in frames_by_id:
            raise Problem(404, "unknown frame", f"no frame {frame_id} in {name}")
        with cache_lock:
            if frame_id not in instance_cache:
                try:
                    mask = mask_provider.mask(frame_id)
                    instance_cache[frame_id] = segment_frame(
                        frames_by_id[frame_id],
                        mask,
                        edge_provider,
                        frame_id,
                        seg_config,
                    )
                except PipelineError as exc:
                    raise Problem(404, "segmentation unavailable", str(exc))
            return instance_cache[frame_id]

    app = FastAPI(title="review service")

    @app.exception_handler(Problem)
    async def _on_problem(request: Request, exc: Problem):
        return _problem_response(exc.status, exc.title, exc.detail)

    @app.exception_handler(StarletteHTTPException)
    async def _on_http(request: Request, exc: StarletteHTTPException):
        return _problem_response(exc.status_code, "request failed", str(exc.detail))

    @app.exception_handler(RequestValidationError)
    async def _on_validation(request: Request, exc: RequestValidationError):
        return _problem_response(422, "invalid request body", str(exc.errors()))

    def check_sequence(sequence: str) -> None:
        if sequence != name:
            raise Problem(404, "unknown sequence", f"no sequence {sequence!r}")

    def check_revision(session: Session, revision: int) -> None:
        if revision != session.revision:
            raise Problem(
                409,
                "stale revision",
                f"session {session.id} is at revision {session.revision}, "
                f"request was based on {revision}",
            )

    @app.get("/sequences")
    def list_sequences():
        return [{"name": name, "frames": list(seq.frame_ids)}]

    @app.get("/sequences/{sequence}/frames/{frame_id}/instances")
    def frame_instances(sequence: str, frame_id: int):
        check_sequence(sequence)
        return [
            {
                "index": idx,
                "bbox": list(inst.bbox),
                "centroid": list(inst.centroid),
                "area": inst.area,
                "low_confidence": inst.low_confidence,
            }
            for idx, inst in enumerate(instances_for(frame_id))
        ]

    @app.get("/sequences/{sequence}/frames/{frame_id}/image.png")
    @app.get("/sequences/{sequence}/frames/{frame_id}/image")
    def frame_image(sequence: str, frame_id: int):
        check_sequence(sequence)
        overlay = render_overlay(frames_by_id[frame_id], instances_for(frame_id))
        buf = io.BytesIO()
        overlay.save(buf, format="PNG")
        return Response(content=buf.getvalue(), media_type="image/png")

    @app.get("/sessions/{session_id}")
    def session_state(session_id: str):
        with store.lock(session_id):
            return store.get(session_id).state()

    @app.post("/sessions/{session_id}/target")
    def set_target(session_id: str, body: TargetBody):
        with store.lock(session_id):
            session = store.get(session_id)
            check_revision(session, body.revision)
            instances = instances_for(body.frame)
            if not 0 <= body.instance < len(instances):
                raise Problem(
                    404,
                    "unknown instance",
                    f"frame {body.frame} has no instance {body.instance}",
                )
            revision = session.record(
                "target", {"frame": body.frame, "instance": body.instance}
            )
            return {"revision": revision, "target": session.target}

    @app.post("/sessions/{session_id}/flags")
    def add_flags(session_id: str, body: FlagsBody):
        if dataset is None:
            raise Problem(
                404, "no dataset", "service was started without a dataset"
            )
        rows = []
        for item in body.rows:
            if (
                not isinstance(item, (list, tuple))
                or len(item) != 2
                or not all(isinstance(v, int) for v in item)
            ):
                raise Problem(
                    422,
                    "invalid request body",
                    f"rows entries must be [frame, instance] pairs, got {item!r}",
                )
            rows.append((item[0], item[1]))
        known = {(r.frame_id, r.instance_id) for r in dataset.rows}
        offenders = sorted(set(rows) - known)
        if offenders:
            raise Problem(
                404,
                "unknown rows",
                f"flags reference rows not in the dataset: {offenders}",
            )
        with store.lock(session_id):
            session = store.get(session_id)
            check_revision(session, body.revision)
            revision = session.record(
                "flags", {"rows": [list(r) for r in rows]}
            )
            return {"revision": revision, "flagged": len(session.flags)}

    @app.post("/sessions/{session_id}/truth")
    def add_truth(session_id: str, body: TruthBody):
        if body.verdict not in VERDICTS:
            raise Problem(
                400,
                "unknown verdict",
                f"verdict must be one of {VERDICTS}, got {body.verdict!r}",
            )
        if body.verdict == "missed":
            instance = -1
            if body.frame not in frames_by_id:
                raise Problem(404, "unknown frame", f"no frame {body.frame}")
        else:
            instances = instances_for(body.frame)
            if not 0 <= body.instance < len(instances):
                raise Problem(
                    404,
                    "unknown instance",
                    f"frame {body.frame} has no instance {body.instance}",
                )
            instance = body.instance
        with store.lock(session_id):
            session = store.get(session_id)
            check_revision(session, body.revision)
            revision = session.record(
                "truth",
                {"frame": body.frame, "instance": instance, "verdict": body.verdict},
            )
            return {"revision": revision, "marks": len(session.truth)}

    @app.get("/sessions/{session_id}/export/dataset.csv")
    def export_dataset(session_id: str):
        if dataset is None:
            raise Problem(
                404, "no dataset", "service was started without a dataset"
            )
        with store.lock(session_id):
            session = store.get(session_id)
            cleaned = cleanse(dataset, session.flags)
        return Response(
            content=render_csv(cleaned).encode("utf-8"),
            media_type="text/csv; charset=utf-8",
        )

    @app.get("/sessions/{session_id}/export/truth.jsonl")
    def export_truth(session_id: str):
        with store.lock(session_id):
            session = store.get(session_id)
            lines = [
                json.dumps({"frame": f, "instance": i, "verdict": v})
                for (f, i), v in sorted(session.truth.items())
            ]
        body = "".join(line + "\n" for line in lines)
        return Response(
            content=body.encode("utf-8"), media_type="application/x-ndjson"
        )

    return app
