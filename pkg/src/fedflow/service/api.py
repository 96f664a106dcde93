"""HTTP facade over the service core.

Thin by design: every route authenticates, converts the pydantic request
into core dataclasses, calls one ServiceCore method, and returns canonical
record documents. All domain errors map onto ``{code, message, detail}``
bodies with the status carried by the exception type.
"""

from __future__ import annotations

from fastapi import Depends, FastAPI, Header, Query, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse

from fedflow.core import serialization as ser
from fedflow.core.errors import AuthFailed, FedflowError, InvalidFilter
from fedflow.core.records import BatchJobState, TransferState
from fedflow.core.states import JobState
from fedflow.service import schemas
from fedflow.service.core import ServiceCore


def _parse_tags(raw: list[str]) -> dict[str, str]:
    tags = {}
    for entry in raw:
        key, sep, value = entry.partition(":")
        if not sep or not key:
            raise InvalidFilter(f"tag filter {entry!r} must look like key:value")
        tags[key] = value
    return tags


def create_app(core: ServiceCore) -> FastAPI:
    app = FastAPI(title="fedflow", docs_url=None, redoc_url=None)
    app.state.core = core

    def current_user(authorization: str = Header(default="")) -> int:
        scheme, _, token = authorization.partition(" ")
        if scheme.lower() != "bearer" or not token:
            raise AuthFailed("missing bearer token")
        return core.authenticate(token)

    @app.exception_handler(FedflowError)
    async def _domain_error(_req: Request, exc: FedflowError):
        return JSONResponse(status_code=exc.http_status, content=exc.to_wire())

    @app.exception_handler(RequestValidationError)
    async def _validation_error(_req: Request, exc: RequestValidationError):
        detail = {"errors": [str(e.get("msg", "")) for e in exc.errors()[:5]]}
        return JSONResponse(
            status_code=400,
            content={"code": "invalid_request", "message": "malformed request", "detail": detail},
        )

    # ---- auth ---------------------------------------------------------------

    @app.post("/auth/login")
    def login(body: schemas.LoginRequest):
        token, expires_at = core.login(body.username, body.password)
        return {"token": token, "expires_at": ser.ts_to_us(expires_at)}

    # ---- sites ----------------------------------------------------------------

    @app.get("/sites")
    def list_sites(user: int = Depends(current_user)):
        return {"sites": [ser.site_to_doc(s) for s in core.list_sites(user)]}

    @app.post("/sites", status_code=201)
    def register_site(body: schemas.SiteCreateRequest, user: int = Depends(current_user)):
        return ser.site_to_doc(core.register_site(user, body.hostname, body.path))

    @app.get("/sites/{site_id}/backlog")
    def site_backlog(site_id: int, user: int = Depends(current_user)):
        return core.backlog_summary(user, site_id)

    # ---- apps -------------------------------------------------------------------

    @app.post("/sites/{site_id}/apps")
    def sync_apps(site_id: int, body: schemas.AppSyncRequest, user: int = Depends(current_user)):
        drafts = [draft.model_dump() for draft in body.apps]
        return {"apps": [ser.app_to_doc(a) for a in core.sync_apps(user, site_id, drafts)]}

    @app.get("/apps")
    def list_apps(site: int | None = None, user: int = Depends(current_user)):
        return {"apps": [ser.app_to_doc(a) for a in core.list_apps(user, site)]}

    # ---- jobs ---------------------------------------------------------------------

    @app.post("/jobs", status_code=201)
    def create_jobs(body: schemas.JobCreateRequest, user: int = Depends(current_user)):
        drafts = [d.to_draft() for d in body.jobs]
        return {"jobs": [ser.job_to_doc(j) for j in core.bulk_create_jobs(user, drafts)]}

    @app.get("/jobs")
    def list_jobs(
        state: JobState | None = None,
        tags: list[str] = Query(default=[]),
        site: int | None = None,
        id: list[int] = Query(default=[]),
        limit: int | None = None,
        offset: int = 0,
        user: int = Depends(current_user),
    ):
        jobs = core.query_jobs(
            user,
            state=state,
            tags=_parse_tags(tags),
            site_id=site,
            ids=id or None,
            limit=limit,
            offset=offset,
        )
        return {"jobs": [ser.job_to_doc(j) for j in jobs]}

    @app.patch("/jobs")
    def update_jobs(body: schemas.JobPatchRequest, user: int = Depends(current_user)):
        events, errors = core.bulk_update_jobs(user, [u.to_update() for u in body.updates])
        return {"events": [ser.event_to_doc(e) for e in events], "errors": errors}

    # ---- batch jobs ------------------------------------------------------------------

    @app.post("/batch-jobs", status_code=201)
    def create_batch_job(body: schemas.BatchJobCreateRequest, user: int = Depends(current_user)):
        bj = core.create_batch_job(
            user,
            site_id=body.site_id,
            num_nodes=body.num_nodes,
            wall_time=body.wall_time,
            queue=body.queue,
            project=body.project,
            job_mode=body.job_mode,
        )
        return ser.batchjob_to_doc(bj)

    @app.get("/batch-jobs")
    def list_batch_jobs(
        site: int | None = None,
        state: list[BatchJobState] = Query(default=[]),
        user: int = Depends(current_user),
    ):
        rows = core.list_batch_jobs(user, site_id=site, states=tuple(state) or None)
        return {"batch_jobs": [ser.batchjob_to_doc(b) for b in rows]}

    @app.patch("/batch-jobs")
    def update_batch_jobs(body: schemas.BatchJobPatchRequest, user: int = Depends(current_user)):
        rows = core.update_batch_jobs(user, [u.to_update() for u in body.updates])
        return {"batch_jobs": [ser.batchjob_to_doc(b) for b in rows]}

    # ---- sessions ----------------------------------------------------------------------

    @app.post("/sessions", status_code=201)
    def create_session(body: schemas.SessionCreateRequest, user: int = Depends(current_user)):
        core.expire_stale_sessions()
        session = core.create_session(user, body.site_id, body.batchjob_id)
        return ser.session_to_doc(session)

    @app.post("/sessions/{session_id}/acquire")
    def acquire(session_id: int, body: schemas.AcquireRequest, user: int = Depends(current_user)):
        jobs = core.acquire_jobs(
            user,
            session_id,
            max_num_jobs=body.max_num_jobs,
            available=body.available.to_record(),
            acquirable_states=tuple(body.acquirable_states),
        )
        return {"jobs": [ser.job_to_doc(j) for j in jobs]}

    @app.put("/sessions/{session_id}/heartbeat")
    def heartbeat(session_id: int, user: int = Depends(current_user)):
        return ser.session_to_doc(core.heartbeat(user, session_id))

    @app.delete("/sessions/{session_id}")
    def delete_session(session_id: int, user: int = Depends(current_user)):
        return {"reset_job_ids": core.delete_session(user, session_id)}

    # ---- transfers ------------------------------------------------------------------------

    @app.get("/transfers")
    def list_transfers(
        site: int,
        state: TransferState | None = None,
        direction: str | None = None,
        user: int = Depends(current_user),
    ):
        items = core.list_transfer_items(user, site, state=state, direction=direction)
        return {"transfer_items": [ser.item_to_doc(i) for i in items]}

    @app.patch("/transfers")
    def update_transfers(body: schemas.TransferPatchRequest, user: int = Depends(current_user)):
        items, events, errors = core.update_transfer_items(
            user, [u.to_update() for u in body.updates]
        )
        return {
            "transfer_items": [ser.item_to_doc(i) for i in items],
            "events": [ser.event_to_doc(e) for e in events],
            "errors": errors,
        }

    # ---- events -------------------------------------------------------------------------------

    @app.get("/events")
    def list_events(
        job_id: int | None = None,
        from_state: JobState | None = None,
        to_state: JobState | None = None,
        begin: int | None = None,
        end: int | None = None,
        tags: list[str] = Query(default=[]),
        limit: int | None = None,
        offset: int = 0,
        user: int = Depends(current_user),
    ):
        events = core.query_events(
            user,
            job_id=job_id,
            from_state=from_state,
            to_state=to_state,
            begin=ser.us_to_ts(begin),
            end=ser.us_to_ts(end),
            tags=_parse_tags(tags),
            limit=limit,
            offset=offset,
        )
        return {"events": [ser.event_to_doc(e) for e in events]}

    return app


def serve(core: ServiceCore, host: str = "127.0.0.1", port: int = 8000) -> None:
    import uvicorn

    uvicorn.run(create_app(core), host=host, port=port, log_level="warning")
