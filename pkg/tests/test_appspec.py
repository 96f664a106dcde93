"""Command templating and transfer-slot resolution."""

from __future__ import annotations

import pytest
from hypothesis import given
from hypothesis import strategies as st

from fedflow.core import AppSpec, ParamSpec, TransferSlot, render_command, resolve_transfer_slots, validate_app_spec
from fedflow.core.appspec import parse_remote_uri, template_placeholders
from fedflow.core.errors import (
    InvalidAppSpec,
    MissingParameter,
    MissingRequiredSlot,
    UnknownParameter,
    UnknownSlot,
)


def xpcs_corr_app() -> AppSpec:
    """Fixed-command analysis app with two inputs and one result file."""
    return AppSpec(
        app_id=1,
        site_id=1,
        name="eigen_corr",
        command_template="/software/xpcs-eigen2/build/corr inp.h5 -imm inp.imm",
        parameters={},
        transfer_slots={
            "h5_in": TransferSlot(direction="in", required=True, local_path="inp.h5"),
            "imm_in": TransferSlot(direction="in", required=True, local_path="inp.imm"),
            "h5_out": TransferSlot(direction="out", required=True, local_path="inp.h5"),
        },
        environment={"HDF5_USE_FILE_LOCKING": "FALSE"},
        cleanup_files=("*.hdf", "*.imm", "*.h5"),
    )


def test_render_without_placeholders_is_verbatim():
    app = xpcs_corr_app()
    cmd = render_command(app, {})
    assert cmd == "/software/xpcs-eigen2/build/corr inp.h5 -imm inp.imm"


def test_render_substitutes_all_occurrences():
    app = AppSpec(
        app_id=1,
        site_id=1,
        name="md",
        command_template="simulate {{infile}} --out {{infile}}.log --steps {{steps}}",
        parameters={"infile": ParamSpec(required=True), "steps": ParamSpec(required=False, default="100")},
    )
    cmd = render_command(app, {"infile": "a.xyz"})
    assert cmd == "simulate a.xyz --out a.xyz.log --steps 100"
    assert render_command(app, {"infile": "a.xyz", "steps": "5"}).endswith("--steps 5")


def test_render_missing_required_parameter():
    app = AppSpec(app_id=1, site_id=1, name="x", command_template="run {{p}}",
                  parameters={"p": ParamSpec(required=True)})
    with pytest.raises(MissingParameter):
        render_command(app, {})


def test_render_unknown_parameter():
    app = AppSpec(app_id=1, site_id=1, name="x", command_template="run", parameters={})
    with pytest.raises(UnknownParameter):
        render_command(app, {"bogus": "1"})


def test_render_declared_but_unreferenced_parameter_is_accepted():
    app = AppSpec(app_id=1, site_id=1, name="x", command_template="run",
                  parameters={"note": ParamSpec(required=False)})
    assert render_command(app, {"note": "anything"}) == "run"


def test_render_idempotent_on_rendered_output():
    app = AppSpec(app_id=1, site_id=1, name="x", command_template="run {{p}} {{q}}",
                  parameters={"p": ParamSpec(), "q": ParamSpec()})
    rendered = render_command(app, {"p": "alpha", "q": "beta"})
    again = AppSpec(app_id=1, site_id=1, name="x", command_template=rendered, parameters={})
    assert render_command(again, {}) == rendered


def test_validate_rejects_undeclared_placeholder():
    app = AppSpec(app_id=1, site_id=1, name="x", command_template="run {{missing}}", parameters={})
    with pytest.raises(InvalidAppSpec):
        validate_app_spec(app)


def test_validate_rejects_bad_slot():
    base = dict(app_id=1, site_id=1, name="x", command_template="run")
    with pytest.raises(InvalidAppSpec):
        validate_app_spec(AppSpec(**base, transfer_slots={"s": TransferSlot(direction="sideways", local_path="f")}))
    with pytest.raises(InvalidAppSpec):
        validate_app_spec(AppSpec(**base, transfer_slots={"s": TransferSlot(direction="in", local_path="/abs")}))
    with pytest.raises(InvalidAppSpec):
        validate_app_spec(AppSpec(**base, transfer_slots={"s": TransferSlot(direction="in", local_path="a/../../b")}))


def test_placeholder_syntax_is_strict():
    # single braces and spaced names are literal text, not placeholders
    assert template_placeholders("run {p} {{ p }} {{2bad}} {{ok_1}}") == {"ok_1"}


def test_resolve_slots_for_analysis_dataset():
    app = xpcs_corr_app()
    bindings = {
        "h5_in": "aps_dtn:/data/xpcs/A001/inp.h5",
        "imm_in": "aps_dtn:/data/xpcs/A001/inp.imm",
        "h5_out": "aps_dtn:/results/A001/inp.h5",
    }
    items = resolve_transfer_slots(app, bindings)
    assert [(i.slot, i.direction, i.local_path) for i in items] == [
        ("h5_in", "in", "inp.h5"),
        ("imm_in", "in", "inp.imm"),
        ("h5_out", "out", "inp.h5"),
    ]
    assert all(i.remote_uri == bindings[i.slot] for i in items)
    assert all(str(i.state) == "PENDING" for i in items)


def test_resolve_slots_missing_required():
    app = xpcs_corr_app()
    with pytest.raises(MissingRequiredSlot):
        resolve_transfer_slots(app, {"h5_in": "aps_dtn:/d/inp.h5", "imm_in": "aps_dtn:/d/inp.imm"})


def test_resolve_slots_unknown_slot():
    app = xpcs_corr_app()
    with pytest.raises(UnknownSlot):
        resolve_transfer_slots(app, {"nope": "aps_dtn:/x"})


def test_resolve_slots_optional_unbound_omitted():
    app = AppSpec(
        app_id=1, site_id=1, name="x", command_template="run",
        transfer_slots={
            "inp": TransferSlot(direction="in", required=True, local_path="inp.dat"),
            "aux": TransferSlot(direction="in", required=False, local_path="aux.dat"),
        },
    )
    items = resolve_transfer_slots(app, {"inp": "dtn:/a/inp.dat"})
    assert [i.slot for i in items] == ["inp"]


def test_resolve_slots_empty_app():
    app = AppSpec(app_id=1, site_id=1, name="x", command_template="run")
    assert resolve_transfer_slots(app, {}) == []


def test_parse_remote_uri():
    assert parse_remote_uri("dtn:/path/to/file") == ("dtn", "/path/to/file")
    with pytest.raises(UnknownSlot):
        parse_remote_uri("no-endpoint")


names = st.from_regex(r"[A-Za-z_][A-Za-z0-9_]{0,8}", fullmatch=True)


@given(st.dictionaries(names, st.text(alphabet="abcdef123", max_size=8), min_size=1, max_size=5))
def test_render_replaces_every_declared_placeholder(params):
    template = " ".join("{{%s}}" % name for name in params)
    app = AppSpec(app_id=1, site_id=1, name="x", command_template=template,
                  parameters={name: ParamSpec(required=True) for name in params})
    validate_app_spec(app)
    rendered = render_command(app, params)
    assert rendered == " ".join(params[name] for name in params)
    assert template_placeholders(rendered) <= set()
