"""Central multi-tenant service: storage, auth, business core, HTTP layer."""

from fedflow.service.core import (
    BatchJobUpdate,
    ItemUpdate,
    JobDraft,
    JobUpdate,
    ServiceConfig,
    ServiceCore,
)

__all__ = [
    "BatchJobUpdate",
    "ItemUpdate",
    "JobDraft",
    "JobUpdate",
    "ServiceConfig",
    "ServiceCore",
]
