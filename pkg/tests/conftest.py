"""Shared fixtures: a virtual-clock service with one bootstrapped tenant."""

from dataclasses import dataclass

import pytest

from fedflow.core.clock import FixedClock
from fedflow.core.records import AppSpec, SiteRecord
from fedflow.service import JobDraft, ServiceConfig, ServiceCore

T0 = 1_000_000.0

NOOP_APP = {
    "name": "noop",
    "command_template": "echo {{message}}",
    "parameters": {"message": {"required": False, "default": "hi"}},
}

STAGED_APP = {
    "name": "corr",
    "command_template": "corr {{inp}}",
    "parameters": {"inp": {"required": True}},
    "transfer_slots": {
        "h5_in": {"direction": "in", "required": True, "local_path": "data.h5"},
        "h5_out": {"direction": "out", "required": True, "local_path": "result.h5"},
    },
    "environment": {"HDF5_USE_FILE_LOCKING": "FALSE"},
}


@dataclass
class Env:
    svc: ServiceCore
    user_id: int
    token: str
    site: SiteRecord
    noop: AppSpec
    corr: AppSpec


def make_env(svc: ServiceCore, username: str) -> Env:
    svc.register_user(username, f"{username}-pw")
    token, _ = svc.login(username, f"{username}-pw")
    user_id = svc.authenticate(token)
    site = svc.register_site(user_id, f"{username}.host", "/projects/demo")
    apps = svc.sync_apps(user_id, site.site_id, [NOOP_APP, STAGED_APP])
    return Env(svc=svc, user_id=user_id, token=token, site=site, noop=apps[0], corr=apps[1])


@pytest.fixture
def clock():
    return FixedClock(T0)


@pytest.fixture
def svc(clock):
    core = ServiceCore(ServiceConfig(signing_key="test-signing-key", lease_ttl=60.0), clock=clock)
    yield core
    core.store.close()


@pytest.fixture
def env(svc):
    return make_env(svc, "alice")


def noop_draft(env: Env, **kwargs) -> JobDraft:
    kwargs.setdefault("app_id", env.noop.app_id)
    kwargs.setdefault("workdir", f"runs/{id(kwargs) % 9973}")
    return JobDraft(**kwargs)


def corr_draft(env: Env, n: int, **kwargs) -> JobDraft:
    kwargs.setdefault("app_id", env.corr.app_id)
    kwargs.setdefault("workdir", f"xpcs/{n}")
    kwargs.setdefault("parameters", {"inp": f"inp{n}.h5"})
    kwargs.setdefault(
        "transfer_bindings",
        {"h5_in": f"aps#data:/raw/{n}.h5", "h5_out": f"aps#data:/out/{n}.h5"},
    )
    return JobDraft(**kwargs)
