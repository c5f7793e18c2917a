"""HTTP JSON API hosting guided sessions for the companion UI.

Sessions are persisted as replayable event logs: on restart the store
re-runs each session's log against its pipeline source, which is exact
because the guide is deterministic.
"""

from __future__ import annotations

import json
import os
import threading
import uuid
from dataclasses import asdict
from pathlib import Path

from fastapi import FastAPI, HTTPException, Request
from fastapi.responses import JSONResponse, PlainTextResponse
from pydantic import BaseModel

from .costmodel import MachineParams
from .executor import execute
from .guide import EmptyHistoryError, GuidedSession, StaleOptionError
from .imageio import synthetic_input
from .ir import PipelineError, dependency_graph_view
from .lowering import (
    BlockView,
    StmtView,
    build_blocks,
    lower,
    view_model,
)
from .parser import parse_pipeline
from .schedule import Schedule


class CreateSession(BaseModel):
    pipeline_source: str
    machine: dict | None = None


class ChooseBody(BaseModel):
    option_id: str


class TileBody(BaseModel):
    range_x: int
    range_y: int = 1


class SessionStore:
    """Thread-safe session map with optional event-log persistence."""

    def __init__(self, state_dir: str | None = None):
        self._lock = threading.Lock()
        self._sessions: dict[str, GuidedSession] = {}
        self._locks: dict[str, threading.Lock] = {}
        self._sources: dict[str, tuple[str, dict | None]] = {}
        self.state_dir = Path(state_dir) if state_dir else None
        if self.state_dir:
            self.state_dir.mkdir(parents=True, exist_ok=True)
            self._load_all()

    def _load_all(self) -> None:
        for path in sorted(self.state_dir.glob("*.json")):
            doc = json.loads(path.read_text())
            pipeline = parse_pipeline(doc["pipeline_source"])
            machine = MachineParams(**doc["machine"]) if doc.get("machine") else None
            sess = GuidedSession.replay(pipeline, doc["log"], machine)
            sid = path.stem
            self._sessions[sid] = sess
            self._locks[sid] = threading.Lock()
            self._sources[sid] = (doc["pipeline_source"], doc.get("machine"))

    def create(self, pipeline_source: str, machine: dict | None) -> str:
        pipeline = parse_pipeline(pipeline_source)
        params = MachineParams(**machine) if machine else None
        sess = GuidedSession(pipeline, params)
        sid = uuid.uuid4().hex
        with self._lock:
            self._sessions[sid] = sess
            self._locks[sid] = threading.Lock()
            self._sources[sid] = (pipeline_source, machine)
        self._persist(sid)
        return sid

    def lock(self, sid: str) -> threading.Lock:
        with self._lock:
            if sid not in self._locks:
                raise KeyError(sid)
            return self._locks[sid]

    def get(self, sid: str) -> GuidedSession:
        with self._lock:
            try:
                return self._sessions[sid]
            except KeyError:
                raise KeyError(sid) from None

    def _persist(self, sid: str) -> None:
        if not self.state_dir:
            return
        source, machine = self._sources[sid]
        doc = {
            "pipeline_source": source,
            "machine": machine,
            "log": self._sessions[sid].log,
        }
        tmp = self.state_dir / f".{sid}.tmp"
        tmp.write_text(json.dumps(doc))
        tmp.replace(self.state_dir / f"{sid}.json")

    def after_mutation(self, sid: str) -> None:
        self._persist(sid)


def _blocks_json(views: list) -> list[dict]:
    out = []
    for node in views:
        if isinstance(node, StmtView):
            out.append(
                {
                    "kind": "stmt",
                    "func": node.func,
                    "region": {d: list(r) for d, r in node.region.items()},
                    "tile_size": dict(node.tile_size),
                }
            )
        else:
            assert isinstance(node, BlockView)
            out.append(
                {
                    "kind": "block",
                    "id": node.id,
                    "func": node.func,
                    "level": node.level,
                    "loops": [{"var": v, "extent": e} for v, e in node.loops],
                    "markers": list(node.markers),
                    "body": _blocks_json(node.body),
                }
            )
    return out


def session_state(sess: GuidedSession) -> dict:
    p = sess.pipeline
    nest = lower(p, sess.schedule, sess.machine.vector_width)
    instruction = sess.current_instruction()
    viz = view_model(nest, p.output_extent)
    options = [] if sess.done else [
        {
            "option_id": o.option_id,
            "description": o.description,
            "kind": "location" if o.location is not None else "tile",
            "ranges": list(o.ranges) if o.ranges else None,
            "position": (
                None
                if o.location is None or o.location.position is None
                else {
                    "path": list(o.location.position.path),
                    "index": o.location.position.index,
                }
            ),
            "cost": o.cost.as_dict(),
        }
        for o in sess.options
    ]
    return {
        "instruction": instruction.text,
        "highlighted_func": instruction.highlighted_func,
        "phase": sess.phase,
        "done": sess.done,
        "dependency_graph": dependency_graph_view(p, instruction.highlighted_func),
        "loop_nest": _blocks_json(build_blocks(nest)),
        "tile_viz": [asdict(e) for e in viz],
        "options": options,
        "current_cost": instruction.current_cost.as_dict(),
        "schedule_script": sess.export_schedule(),
    }


def create_app(state_dir: str | None = None, ui_dir: str | None = None) -> FastAPI:
    app = FastAPI(title="tileguide", version="0.1.0")
    store = SessionStore(state_dir)
    app.state.store = store

    @app.exception_handler(PipelineError)
    async def pipeline_error(request: Request, exc: PipelineError):
        status = 409 if isinstance(exc, StaleOptionError) else 422
        return JSONResponse({"detail": str(exc)}, status_code=status)

    def fetch(sid: str) -> GuidedSession:
        try:
            return store.get(sid)
        except KeyError:
            raise HTTPException(404, f"unknown session {sid!r}")

    @app.get("/examples")
    def examples():
        from importlib.resources import files

        data = files("tileguide").joinpath("data")
        return {
            path.name: path.read_text()
            for path in sorted(data.iterdir())
            if path.name.endswith(".pipe")
        }

    @app.post("/sessions")
    def create_session(body: CreateSession):
        sid = store.create(body.pipeline_source, body.machine)
        sess = store.get(sid)
        with store.lock(sid):
            return {"session_id": sid, "state": session_state(sess)}

    @app.get("/sessions/{sid}")
    def get_session(sid: str):
        sess = fetch(sid)
        with store.lock(sid):
            return session_state(sess)

    @app.post("/sessions/{sid}/choose")
    def choose(sid: str, body: ChooseBody):
        sess = fetch(sid)
        with store.lock(sid):
            sess.choose(body.option_id)
            store.after_mutation(sid)
            return session_state(sess)

    @app.post("/sessions/{sid}/tile")
    def tile(sid: str, body: TileBody):
        sess = fetch(sid)
        with store.lock(sid):
            sess.custom_tile(body.range_x, body.range_y)
            store.after_mutation(sid)
            return session_state(sess)

    @app.post("/sessions/{sid}/undo")
    def undo(sid: str):
        sess = fetch(sid)
        with store.lock(sid):
            try:
                sess.undo()
            except EmptyHistoryError as exc:
                raise HTTPException(422, str(exc))
            store.after_mutation(sid)
            return session_state(sess)

    @app.get("/sessions/{sid}/schedule")
    def schedule_text(sid: str):
        sess = fetch(sid)
        with store.lock(sid):
            return PlainTextResponse(sess.export_schedule())

    @app.get("/sessions/{sid}/run")
    def run(sid: str, size: str | None = None):
        sess = fetch(sid)
        with store.lock(sid):
            p = sess.pipeline
            schedule = sess.schedule
            if size:
                try:
                    w, h = (int(v) for v in size.lower().split("x"))
                except ValueError:
                    raise HTTPException(422, f"bad size {size!r}, expected WxH")
                dims = p.funcs[p.output].dims
                ext = (w, h) + p.output_extent[2:] if len(dims) > 2 else (w, h)[: len(dims)]
                p = p.with_extent(ext)
                schedule = fit_tile_ranges(p, schedule)
            inputs = {
                name: synthetic_input(p.funcs[name].extent) for name in p.inputs
            }
            result = execute(p, schedule, inputs)
            r = result.report
            return {
                "size": list(p.output_extent),
                "evaluations": r.evaluations,
                "stores": r.stores,
                "loads": r.loads,
                "total_evaluations": r.total_evaluations(),
                "wall_time": r.wall_time,
            }

    if ui_dir is None:
        ui_dir = os.environ.get("TILEGUIDE_UI")
    if ui_dir is None:
        guess = Path(__file__).resolve().parents[2] / "frontend" / "dist"
        ui_dir = str(guess) if guess.is_dir() else None
    if ui_dir and Path(ui_dir).is_dir():
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=ui_dir, html=True), name="ui")

    return app


def fit_tile_ranges(p, s: Schedule) -> Schedule:
    """Clamp tile ranges after the pipeline is re-targeted at a new extent.

    Lowering already degrades an oversized range per instance, so this is
    a one-pass rewrite against the current nest's extents; positions are
    untouched.
    """
    from dataclasses import replace as _replace

    from .schedule import TileSplit

    nest = lower(p, s)
    decisions = dict(s.decisions)
    for f, d in s.decisions.items():
        if d.inline or d.split is None:
            continue
        fi = nest.info[f]
        rx = min(d.split.range_x, fi.nominal_inst("x"))
        ry = min(d.split.range_y, fi.nominal_inst("y")) if "y" in fi.dims else 1
        decisions[f] = _replace(d, split=TileSplit(rx, ry))
    return Schedule(decisions)
