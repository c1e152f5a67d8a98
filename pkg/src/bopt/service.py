"""HTTP facade over optimization sessions.

A single-user local tool: plain JSON over a local port, no auth. All
state lives in a directory of session documents. Every request loads
the document, mutates it through the session object, and atomically
rewrites it under a per-session lock before the response leaves the
process, so a crash mid-request never loses a recorded preference and
a replayed idempotency token never records twice.

The wire formats are documented in docs/service-api.md.
"""

from __future__ import annotations

import os
import threading

import numpy as np
from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse, Response
from pydantic import BaseModel

from .acquisition import AcquisitionSpec
from .kernels import KernelSpec, squared_exp_iso
from .optimizer import BayesianOptimizer, _write_json_atomic
from .preference import PreferenceOptimizer

__all__ = ["ApiError", "SessionStore", "create_app", "render_spec"]

GRID_CAP = 512
DEFAULT_GRID = {1: 256, 2: 48}


class ApiError(Exception):
    """Request failure with a machine-readable code and optional field path."""

    def __init__(self, status: int, code: str, message: str, field: str | None = None):
        super().__init__(message)
        self.status = status
        self.code = code
        self.message = message
        self.field = field

    def body(self) -> dict:
        error = {"code": self.code, "message": self.message}
        if self.field is not None:
            error["field"] = self.field
        return {"error": error}


class SessionStore:
    """Directory of session documents with per-session locks.

    Documents are JSON files named ``<id>.json``; writes go through an
    atomic replace so readers never observe a torn file. The locks only
    coordinate threads within one process, which matches the intended
    single-server deployment.
    """

    def __init__(self, root: str):
        self.root = root
        os.makedirs(root, exist_ok=True)
        self._locks: dict[str, threading.Lock] = {}
        self._registry = threading.Lock()

    def lock(self, session_id: str) -> threading.Lock:
        with self._registry:
            return self._locks.setdefault(session_id, threading.Lock())

    def _path(self, session_id: str) -> str:
        # ids are uuid hex generated by this package; reject anything
        # that could escape the store directory
        if not session_id.isalnum():
            raise ApiError(404, "not_found", f"no session {session_id!r}")
        return os.path.join(self.root, f"{session_id}.json")

    def load(self, session_id: str) -> dict:
        import json

        path = self._path(session_id)
        try:
            with open(path, encoding="utf-8") as fh:
                return json.load(fh)
        except FileNotFoundError:
            raise ApiError(404, "not_found", f"no session {session_id!r}") from None

    def save(self, document: dict) -> None:
        _write_json_atomic(self._path(document["id"]), document)

    def delete(self, session_id: str) -> None:
        try:
            os.remove(self._path(session_id))
        except FileNotFoundError:
            raise ApiError(404, "not_found", f"no session {session_id!r}") from None
        with self._registry:
            self._locks.pop(session_id, None)

    def ids(self) -> list[str]:
        names = [n[:-5] for n in os.listdir(self.root) if n.endswith(".json")]
        return sorted(names)


class KernelConfig(BaseModel):
    family: str = "squared_exp_iso"
    length_scale: float | None = None
    length_scales: list[float] | None = None
    signal_variance: float = 1.0
    noise_variance: float = 0.0
    smoothness: float | None = None


class CreateSessionRequest(BaseModel):
    mode: str = "preference"
    bounds: list[list[float]]
    kernel: KernelConfig | None = None
    acquisition: str | None = None
    strategy: str | None = None
    comparison_noise: float | None = None
    refit_period: int = 1
    rng_seed: int = 0


class PostPreferenceRequest(BaseModel):
    winner_index: int
    token: str


def _build_kernel(cfg: KernelConfig | None) -> KernelSpec:
    if cfg is None:
        return squared_exp_iso()
    scales = cfg.length_scales
    if scales is None:
        scales = [cfg.length_scale if cfg.length_scale is not None else 1.0]
    try:
        return KernelSpec(
            family=cfg.family,
            length_scales=tuple(scales),
            signal_variance=cfg.signal_variance,
            noise_variance=cfg.noise_variance,
            smoothness=cfg.smoothness,
        )
    except ValueError as exc:
        raise ApiError(422, "invalid_config", str(exc), field="kernel") from None


def _build_session(cfg: CreateSessionRequest):
    bounds = np.asarray(cfg.bounds, dtype=float)
    if bounds.ndim != 2 or bounds.shape[1] != 2 or bounds.shape[0] < 1:
        raise ApiError(422, "invalid_config", "bounds must be a list of [lo, hi] rows",
                       field="bounds")
    for i, (lo, hi) in enumerate(bounds):
        if not (np.isfinite(lo) and np.isfinite(hi)) or lo >= hi:
            raise ApiError(422, "invalid_config",
                           f"dimension {i} has invalid bounds [{lo}, {hi}]",
                           field=f"bounds[{i}]")
    kernel = _build_kernel(cfg.kernel)
    try:
        if cfg.mode == "scalar":
            acquisition = AcquisitionSpec(kind=cfg.acquisition or "ei")
            return BayesianOptimizer(
                bounds, kernel=kernel, acquisition=acquisition,
                refit_period=cfg.refit_period, rng_seed=cfg.rng_seed,
            )
        if cfg.mode == "preference":
            return PreferenceOptimizer(
                bounds, kernel=kernel, comparison_noise=cfg.comparison_noise,
                strategy=cfg.strategy or "max_ei", rng_seed=cfg.rng_seed,
            )
    except ValueError as exc:
        raise ApiError(422, "invalid_config", str(exc)) from None
    raise ApiError(422, "invalid_config",
                   f"mode must be 'scalar' or 'preference', got {cfg.mode!r}",
                   field="mode")


def _reconstruct(document: dict):
    cls = PreferenceOptimizer if document["mode"] == "preference" else BayesianOptimizer
    return cls.from_dict(document)


def _persist(store: SessionStore, session, tokens: dict) -> None:
    document = session.to_dict()
    if tokens:
        document["tokens"] = tokens
    store.save(document)


def render_spec(point, bounds) -> dict:
    """Declarative rendering of a point: a color swatch with a gamma curve.

    Coordinates are normalized into the unit box and padded with 0.5 up
    to four channels driving hue, saturation, lightness, and the curve
    exponent. The client draws from these numbers alone, so it never
    needs the model or the bounds.
    """
    point = np.asarray(point, dtype=float)
    bounds = np.asarray(bounds, dtype=float)
    unit = (point - bounds[:, 0]) / (bounds[:, 1] - bounds[:, 0])
    unit = np.clip(unit, 0.0, 1.0)
    c = np.concatenate([unit, np.full(max(0, 4 - unit.shape[0]), 0.5)])[:4]
    return {
        "kind": "swatch_curve",
        "hue": round(float(360.0 * c[0]), 4),
        "saturation": round(float(0.25 + 0.6 * c[1]), 4),
        "lightness": round(float(0.3 + 0.4 * c[2]), 4),
        "curve_exponent": round(float(0.25 + 3.75 * c[3]), 4),
    }


def _grid_axes(bounds: np.ndarray, requested: int | None) -> list[np.ndarray]:
    d = bounds.shape[0]
    size = requested if requested is not None else DEFAULT_GRID[d]
    size = max(2, min(int(size), GRID_CAP))
    return [np.linspace(lo, hi, size) for lo, hi in bounds]


def _posterior_curve(session, grid: int | None) -> dict | None:
    """Posterior summary on a grid for d <= 2, None otherwise or unmodeled."""
    bounds = session.bounds
    d = bounds.shape[0]
    if d > 2:
        return None
    if session.mode == "preference":
        if session.laplace() is None:
            return None
    elif session.data.t == 0:
        return None
    axes = _grid_axes(bounds, grid)
    if d == 1:
        queries = axes[0][:, None]
        mean, std = session.posterior_at(queries)
        return {
            "x": axes[0].tolist(),
            "mean": mean.tolist(),
            "std": std.tolist(),
        }
    g1, g2 = np.meshgrid(axes[0], axes[1], indexing="ij")
    queries = np.stack([g1.ravel(), g2.ravel()], axis=1)
    mean, std = session.posterior_at(queries)
    shape = (axes[0].size, axes[1].size)
    return {
        "x1": axes[0].tolist(),
        "x2": axes[1].tolist(),
        "mean": mean.reshape(shape).tolist(),
        "std": std.reshape(shape).tolist(),
    }


def _incumbent_view(session) -> dict | None:
    if session.mode == "preference":
        if session.laplace() is None:
            return None
    elif session.data.t == 0:
        return None
    inc = session.best()
    return {
        "location": [float(v) for v in inc.location],
        "value": float(inc.value),
        "render": render_spec(inc.location, session.bounds),
    }


def _pair_view(session) -> dict | None:
    if getattr(session, "pending_pair", None) is None:
        return None
    first, second = session.pending_pair
    return {
        "points": [[float(v) for v in first], [float(v) for v in second]],
        "renders": [render_spec(first, session.bounds),
                    render_spec(second, session.bounds)],
    }


def _summary(document: dict) -> dict:
    return {
        "id": document["id"],
        "mode": document["mode"],
        "iteration": len(document["history"]),
        "bounds": document["bounds"],
    }


def _state_view(session, grid: int | None = None) -> dict:
    return {
        "schema_version": 1,
        "id": session.id,
        "mode": session.mode,
        "iteration": session.iteration,
        "bounds": session.bounds.tolist(),
        "incumbent": _incumbent_view(session),
        "current_pair": _pair_view(session),
        "posterior_curve": _posterior_curve(session, grid),
    }


def create_app(store: SessionStore | None = None, data_dir: str | None = None) -> FastAPI:
    """Wire the endpoints around a session store.

    Exactly one of ``store`` or ``data_dir`` may be given; with neither,
    sessions go to ``./bopt-sessions``.
    """
    if store is not None and data_dir is not None:
        raise ValueError("pass either store or data_dir, not both")
    if store is None:
        store = SessionStore(data_dir if data_dir is not None else "bopt-sessions")
    app = FastAPI(title="bopt", docs_url=None, redoc_url=None)
    app.state.store = store

    @app.exception_handler(ApiError)
    def api_error(_request: Request, exc: ApiError):
        return JSONResponse(status_code=exc.status, content=exc.body())

    @app.exception_handler(RequestValidationError)
    def validation_error(_request: Request, exc: RequestValidationError):
        first = exc.errors()[0]
        field = ".".join(str(part) for part in first["loc"] if part != "body")
        body = {"error": {"code": "invalid_request",
                          "message": first["msg"], "field": field}}
        return JSONResponse(status_code=422, content=body)

    @app.get("/health")
    def health():
        return {"status": "ok", "schema_version": 1}

    @app.post("/sessions", status_code=201)
    def create_session(cfg: CreateSessionRequest):
        session = _build_session(cfg)
        with store.lock(session.id):
            _persist(store, session, {})
        return {"id": session.id, "mode": session.mode, "iteration": 0}

    @app.get("/sessions")
    def list_sessions():
        out = []
        for sid in store.ids():
            with store.lock(sid):
                # a file deleted or corrupted between listing and read
                # drops out rather than failing the whole listing
                try:
                    out.append(_summary(store.load(sid)))
                except (ApiError, ValueError, KeyError):
                    continue
        return {"sessions": out}

    @app.get("/sessions/{sid}")
    def read_session(sid: str):
        with store.lock(sid):
            return _summary(store.load(sid))

    @app.delete("/sessions/{sid}", status_code=204)
    def delete_session(sid: str):
        with store.lock(sid):
            store.delete(sid)
        return Response(status_code=204)

    @app.get("/sessions/{sid}/pair")
    def get_pair(sid: str):
        with store.lock(sid):
            document = store.load(sid)
            if document["mode"] != "preference":
                raise ApiError(409, "wrong_mode",
                               "candidate pairs only exist on preference sessions")
            session = _reconstruct(document)
            session.get_pair()
            # persist the outstanding pair so a restart re-serves it
            _persist(store, session, document.get("tokens", {}))
            view = _pair_view(session)
            view["iteration"] = session.iteration
            return view

    @app.post("/sessions/{sid}/preference")
    def post_preference(sid: str, body: PostPreferenceRequest):
        if body.winner_index not in (0, 1):
            raise ApiError(422, "invalid_winner",
                           f"winner_index must be 0 or 1, got {body.winner_index}",
                           field="winner_index")
        with store.lock(sid):
            document = store.load(sid)
            if document["mode"] != "preference":
                raise ApiError(409, "wrong_mode",
                               "preferences only apply to preference sessions")
            tokens = document.get("tokens", {})
            session = _reconstruct(document)
            if body.token in tokens:
                # replay of an already-recorded mutation: serve the
                # current view without touching the model
                return _state_view(session)
            if session.pending_pair is None:
                raise ApiError(409, "no_outstanding_pair",
                               "fetch a pair before posting a preference")
            first, second = session.pending_pair
            winner = first if body.winner_index == 0 else second
            loser = second if body.winner_index == 0 else first
            session.record_preference(winner, loser)
            tokens[body.token] = session.iteration
            # written before the response: a crash past this point plus
            # a client replay still yields exactly one recorded pair
            _persist(store, session, tokens)
            return _state_view(session)

    @app.get("/sessions/{sid}/state")
    def get_state(sid: str, grid: int | None = None):
        with store.lock(sid):
            session = _reconstruct(store.load(sid))
        return _state_view(session, grid)

    return app


def run(host: str = "127.0.0.1", port: int = 8765,
        data_dir: str = "bopt-sessions") -> None:
    """Serve until interrupted; used by the command-line front end."""
    import uvicorn

    uvicorn.run(create_app(data_dir=data_dir), host=host, port=port, log_level="warning")
