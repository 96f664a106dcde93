"""Application templates: command rendering and transfer-slot resolution."""

from __future__ import annotations

import re

from fedflow.core.errors import (
    InvalidAppSpec,
    MissingParameter,
    MissingRequiredSlot,
    UnknownParameter,
    UnknownSlot,
)
from fedflow.core.records import AppSpec, TransferItemRecord, TransferState

PARAM_NAME_RE = re.compile(r"^[A-Za-z_][A-Za-z0-9_]*$")
PLACEHOLDER_RE = re.compile(r"\{\{([A-Za-z_][A-Za-z0-9_]*)\}\}")

_DIRECTIONS = ("in", "out")


def template_placeholders(command_template: str) -> set[str]:
    return set(PLACEHOLDER_RE.findall(command_template))


def validate_app_spec(app: AppSpec) -> AppSpec:
    """Reject templates and slot maps that could never render or stage."""
    if not app.name:
        raise InvalidAppSpec("app name must be non-empty")
    if not app.command_template.strip():
        raise InvalidAppSpec(f"app {app.name}: command_template must be non-empty")
    for name in app.parameters:
        if not PARAM_NAME_RE.match(name):
            raise InvalidAppSpec(f"app {app.name}: illegal parameter name {name!r}")
    undeclared = template_placeholders(app.command_template) - set(app.parameters)
    if undeclared:
        raise InvalidAppSpec(
            f"app {app.name}: placeholders without declared parameters: {sorted(undeclared)}"
        )
    for slot_name, slot in app.transfer_slots.items():
        if not PARAM_NAME_RE.match(slot_name):
            raise InvalidAppSpec(f"app {app.name}: illegal slot name {slot_name!r}")
        if slot.direction not in _DIRECTIONS:
            raise InvalidAppSpec(
                f"app {app.name}: slot {slot_name}: direction must be one of {_DIRECTIONS}"
            )
        if not slot.local_path:
            raise InvalidAppSpec(f"app {app.name}: slot {slot_name}: local_path required")
        path = slot.local_path
        if path.startswith("/") or ".." in path.split("/"):
            raise InvalidAppSpec(
                f"app {app.name}: slot {slot_name}: local_path must be workdir-relative"
            )
    return app


def render_command(app: AppSpec, parameters: dict[str, str]) -> str:
    """Substitute ``{{name}}`` placeholders; defaults fill unsupplied ones.

    Supplied keys must be declared on the app; required parameters without a
    default must be supplied. Rendering a string with no placeholders is the
    identity, so rendering is idempotent on already-rendered commands.
    """
    unknown = set(parameters) - set(app.parameters)
    if unknown:
        name = sorted(unknown)[0]
        raise UnknownParameter(f"app {app.name}: parameter {name!r} is not declared")
    values: dict[str, str] = {}
    for name, spec in app.parameters.items():
        if name in parameters:
            values[name] = str(parameters[name])
        elif spec.default is not None:
            values[name] = spec.default
        elif spec.required:
            raise MissingParameter(f"app {app.name}: required parameter {name!r} not supplied")

    def substitute(match: re.Match) -> str:
        name = match.group(1)
        if name not in values:
            raise MissingParameter(f"app {app.name}: required parameter {name!r} not supplied")
        return values[name]

    return PLACEHOLDER_RE.sub(substitute, app.command_template)


def resolve_transfer_slots(app: AppSpec, bindings: dict[str, str]) -> list[TransferItemRecord]:
    """Expand a job's slot->remote-URI bindings into transfer item drafts.

    Follows the app's slot declaration order; optional unbound slots produce
    nothing. Returned items carry placeholder ids (the store assigns real
    ones at job creation).
    """
    unknown = set(bindings) - set(app.transfer_slots)
    if unknown:
        name = sorted(unknown)[0]
        raise UnknownSlot(f"app {app.name}: no transfer slot named {name!r}")
    items: list[TransferItemRecord] = []
    for slot_name, slot in app.transfer_slots.items():
        if slot_name in bindings:
            remote_uri = bindings[slot_name]
            parse_remote_uri(remote_uri)
            items.append(
                TransferItemRecord(
                    item_id=0,
                    job_id=0,
                    slot=slot_name,
                    direction=slot.direction,
                    local_path=slot.local_path,
                    remote_uri=remote_uri,
                    state=TransferState.PENDING,
                    recursive=slot.recursive,
                )
            )
        elif slot.required:
            raise MissingRequiredSlot(f"app {app.name}: required slot {slot_name!r} not bound")
    return items


def parse_remote_uri(remote_uri: str) -> tuple[str, str]:
    """Split ``endpoint:path`` into its endpoint and path parts."""
    endpoint, sep, path = remote_uri.partition(":")
    if not endpoint or not sep or not path:
        raise UnknownSlot(f"malformed remote uri {remote_uri!r}; expected endpoint:path")
    return endpoint, path
