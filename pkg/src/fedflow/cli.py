"""Command-line front end.

Thin client over the HTTP API: every command builds an HttpApi from saved
credentials, calls one or two endpoints, and prints plain text. The only
state kept on disk is {url, token} in $FEDFLOW_HOME/credentials.json.
Service, agent, launcher, and simulator entry points live here too so a
deployment is one installed package everywhere.

Exit codes: 0 success, 1 validation or usage error, 2 cannot reach or
authenticate against the service.
"""

from __future__ import annotations

import functools
import json
import os
import sys
from pathlib import Path

import click
import yaml

from fedflow.core.errors import ApiError, AuthFailed, BackendUnavailable, ConfigError, FedflowError
from fedflow.core.records import ResourceSpec
from fedflow.core.states import JobState

AUTH_STATUSES = (401, 403)


def _home() -> Path:
    return Path(os.environ.get("FEDFLOW_HOME", Path.home() / ".fedflow"))


def _credentials_path() -> Path:
    return _home() / "credentials.json"


def _load_credentials() -> dict:
    path = _credentials_path()
    if not path.exists():
        return {}
    try:
        return json.loads(path.read_text(encoding="utf-8"))
    except (OSError, ValueError):
        return {}


def _save_credentials(creds: dict) -> None:
    home = _home()
    home.mkdir(parents=True, exist_ok=True)
    path = _credentials_path()
    path.write_text(json.dumps(creds, indent=2) + "\n", encoding="utf-8")
    try:
        path.chmod(0o600)
    except OSError:
        pass


def _open_api(url: str | None = None, token: str | None = None):
    from fedflow.client.api import HttpApi

    creds = _load_credentials()
    url = url or os.environ.get("FEDFLOW_URL") or creds.get("url")
    token = token or os.environ.get("FEDFLOW_TOKEN") or creds.get("token")
    if not url:
        raise AuthFailed("no service URL configured; run `fedflow login --url ...`")
    return HttpApi(url, token=token)


def friendly_errors(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except (BackendUnavailable, AuthFailed) as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(2)
        except ApiError as exc:
            click.echo(f"error: {exc.code}: {exc}", err=True)
            sys.exit(2 if exc.http_status in AUTH_STATUSES else 1)
        except (FedflowError, ConfigError, OSError, ValueError) as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(1)

    return wrapper


def _read_structured(path: str):
    text = Path(path).read_text(encoding="utf-8")
    if path.endswith((".yaml", ".yml")):
        return yaml.safe_load(text)
    return json.loads(text)


def _parse_tag_args(pairs: tuple[str, ...]) -> dict[str, str]:
    tags = {}
    for pair in pairs:
        key, sep, value = pair.partition(":")
        if not sep or not key:
            raise ValueError(f"tag filter {pair!r} must look like key:value")
        tags[key] = value
    return tags


@click.group()
def main() -> None:
    """Federated workflow orchestration client."""


@main.command()
@click.argument("username")
@click.option("--url", help="Service base URL; remembered for later commands.")
@click.option("--password", prompt=True, hide_input=True)
@friendly_errors
def login(username: str, url: str | None, password: str) -> None:
    """Obtain an API token and store it locally."""
    creds = _load_credentials()
    api = _open_api(url=url or creds.get("url"))
    api.login(username, password)
    _save_credentials({"url": url or creds.get("url"), "token": api.token})
    click.echo("logged in")


# -- sites and apps -----------------------------------------------------------


@main.group()
def site() -> None:
    """Register and refresh execution sites."""


@site.command("init")
@click.argument("hostname")
@click.argument("path")
@friendly_errors
def site_init(hostname: str, path: str) -> None:
    record = _open_api().register_site(hostname, path)
    click.echo(f"site {record.site_id}: {record.hostname}:{record.path}")


@site.command("sync")
@click.option("-c", "--config", "config_path", required=True, type=click.Path(exists=True))
@friendly_errors
def site_sync(config_path: str) -> None:
    """Re-register the site and push its apps/ directory to the service."""
    from fedflow.agent.config import load_site_config

    cfg = load_site_config(config_path)
    api = _open_api()
    record = api.register_site(cfg.hostname, cfg.path)
    apps_dir = Path(config_path).parent / "apps"
    drafts = []
    if apps_dir.is_dir():
        for entry in sorted(apps_dir.iterdir()):
            if entry.suffix in (".yaml", ".yml", ".json"):
                drafts.append(_read_structured(str(entry)))
    synced = api.sync_apps(record.site_id, drafts) if drafts else []
    click.echo(f"site {record.site_id} refreshed; {len(synced)} apps synced")


@main.group()
def app() -> None:
    """Manage application definitions."""


@app.command("sync")
@click.argument("site_id", type=int)
@click.option("-f", "--file", "file_path", required=True, type=click.Path(exists=True))
@friendly_errors
def app_sync(site_id: int, file_path: str) -> None:
    drafts = _read_structured(file_path)
    if isinstance(drafts, dict):
        drafts = [drafts]
    synced = _open_api().sync_apps(site_id, drafts)
    for spec in synced:
        click.echo(f"app {spec.app_id}: {spec.name}")


# -- jobs ----------------------------------------------------------------------


def _draft_from_doc(doc: dict, app_id: int):
    from fedflow.service.core import JobDraft

    return JobDraft(
        app_id=app_id,
        workdir=doc["workdir"],
        parameters=dict(doc.get("parameters", {})),
        resources=ResourceSpec(**doc.get("resources", {})),
        tags=dict(doc.get("tags", {})),
        transfer_bindings=dict(doc.get("transfer_bindings", {})),
    )


@main.group()
def job() -> None:
    """Submit and inspect jobs."""


@job.command("submit")
@click.option("-f", "--file", "file_path", required=True, type=click.Path(exists=True))
@click.option(
    "--strategy",
    type=click.Choice(["rr", "shortest-backlog"]),
    default="rr",
    show_default=True,
)
@click.option("--sites", "site_names", help="Comma-separated site hostnames.")
@friendly_errors
def job_submit(file_path: str, strategy: str, site_names: str | None) -> None:
    """Distribute drafts across sites and create them.

    The drafts file holds a JSON/YAML list of {app, workdir, parameters,
    resources, tags, transfer_bindings}; `app` is resolved by name on
    whichever site each draft lands on.
    """
    from fedflow.client.routing import RoundRobinRouter, ShortestBacklogRouter

    docs = _read_structured(file_path)
    if not isinstance(docs, list) or not docs:
        raise ValueError("drafts file must hold a non-empty list")
    api = _open_api()
    sites = api.list_sites()
    if site_names:
        wanted = [s.strip() for s in site_names.split(",") if s.strip()]
        by_host = {s.hostname: s for s in sites}
        missing = [w for w in wanted if w not in by_host]
        if missing:
            raise ValueError(f"unknown sites: {', '.join(missing)}")
        sites = [by_host[w] for w in wanted]
    if not sites:
        raise ValueError("no sites registered")

    apps_by_site: dict[int, dict[str, int]] = {}
    for record in sites:
        apps_by_site[record.site_id] = {
            a.name: a.app_id for a in api.list_apps(record.site_id)
        }

    site_ids = [s.site_id for s in sites]
    router = (
        ShortestBacklogRouter(api, site_ids)
        if strategy == "shortest-backlog"
        else RoundRobinRouter(site_ids)
    )
    drafts = [_draft_from_doc(doc, app_id=0) for doc in docs]
    names = [doc.get("app", "") for doc in docs]
    created = 0
    for site_id, assigned in router.assign(list(zip(drafts, names))):
        import dataclasses

        resolved = []
        for draft, name in assigned:
            app_id = apps_by_site[site_id].get(name)
            if app_id is None:
                raise ValueError(f"app {name!r} is not defined on site {site_id}")
            resolved.append(dataclasses.replace(draft, app_id=app_id))
        records = api.create_jobs(resolved)
        created += len(records)
        click.echo(f"site {site_id}: jobs {records[0].job_id}..{records[-1].job_id}")
    click.echo(f"created {created} jobs")


@job.command("ls")
@click.option("--state", "state_name", type=click.Choice([s.value for s in JobState]))
@click.option("--tags", "tag_pairs", multiple=True, help="k:v; repeatable.")
@click.option("--site", "site_id", type=int)
@click.option("--limit", type=int)
@friendly_errors
def job_ls(state_name, tag_pairs, site_id, limit) -> None:
    jobs = _open_api().query_jobs(
        state=JobState(state_name) if state_name else None,
        tags=_parse_tag_args(tag_pairs) or None,
        site_id=site_id,
        limit=limit,
    )
    for record in jobs:
        tags = ",".join(f"{k}:{v}" for k, v in sorted(record.tags.items()))
        click.echo(f"{record.job_id}\t{record.state.value}\t{record.workdir}\t{tags}")
    click.echo(f"{len(jobs)} jobs", err=True)


# -- events and metrics ------------------------------------------------------------


@main.group()
def events() -> None:
    """Event-log access."""


@events.command("export")
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--begin", type=float)
@click.option("--end", type=float)
@friendly_errors
def events_export(out_path: str, begin: float | None, end: float | None) -> None:
    from fedflow.metrics import write_events

    rows = _open_api().query_events(begin=begin, end=end)
    write_events(out_path, rows)
    click.echo(f"wrote {len(rows)} events to {out_path}")


@main.group()
def metrics() -> None:
    """Offline analysis of exported event logs."""


@metrics.command("report")
@click.option("--in", "in_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_path", type=click.Path())
@click.option("--capacity", type=float, help="Node capacity for utilization analysis.")
@click.option("--csv-dir", type=click.Path(), help="Also write per-timeline CSV series.")
@friendly_errors
def metrics_report(in_path, out_path, capacity, csv_dir) -> None:
    from fedflow.metrics import (
        build_report,
        read_events,
        throughput_timeline,
        utilization_timeline,
        write_report,
        write_series_csv,
    )

    rows = read_events(in_path)
    report = build_report(rows, capacity=capacity)
    if csv_dir and rows:
        out = Path(csv_dir)
        out.mkdir(parents=True, exist_ok=True)
        for state in (JobState.STAGED_IN, JobState.FINISHED):
            series = throughput_timeline(rows, state)
            write_series_csv(out / f"throughput_{state.value.lower()}.csv", series)
        if capacity:
            util = utilization_timeline(rows, capacity)
            write_series_csv(out / "running_count.csv", list(zip(util.times, util.counts)))
    if out_path:
        write_report(out_path, report)
        click.echo(f"wrote {out_path}")
    else:
        click.echo(json.dumps(report, indent=2, sort_keys=True))


# -- long-running processes ----------------------------------------------------------


@main.group()
def service() -> None:
    """Run the central API service."""


@service.command("run")
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8000, show_default=True, type=int)
@click.option("--lease-ttl", default=60.0, show_default=True, type=float)
@click.option("--bootstrap-user", help="username:password to create at startup.")
@friendly_errors
def service_run(host, port, lease_ttl, bootstrap_user) -> None:
    from fedflow.service.api import serve
    from fedflow.service.core import ServiceConfig, ServiceCore

    core = ServiceCore(ServiceConfig(lease_ttl=lease_ttl))
    if bootstrap_user:
        username, sep, password = bootstrap_user.partition(":")
        if not sep:
            raise ValueError("--bootstrap-user needs username:password")
        core.register_user(username, password)
    serve(core, host=host, port=port)


@main.group()
def agent() -> None:
    """Run a site agent."""


@agent.command("run")
@click.option("-c", "--config", "config_path", required=True, type=click.Path(exists=True))
@friendly_errors
def agent_run(config_path: str) -> None:
    from fedflow.agent.agent import SiteAgent
    from fedflow.agent.config import load_site_config

    SiteAgent(_open_api(), load_site_config(config_path)).run()


@main.group()
def launcher() -> None:
    """Run a pilot-job launcher inside an allocation."""


@launcher.command("run")
@click.option("--site", "site_id", required=True, type=int)
@click.option("--nodes", required=True, type=int)
@click.option("--cores-per-node", required=True, type=int)
@click.option("--gpus-per-node", default=0.0, type=float, show_default=True)
@click.option(
    "--job-mode",
    type=click.Choice(["per-task-spawn", "node-resident"]),
    default="per-task-spawn",
    show_default=True,
)
@click.option("--wall-time", default=0, type=int, show_default=True, help="Minutes; 0 = unlimited.")
@click.option("--idle-timeout", default=120.0, type=float, show_default=True)
@click.option("--session-ttl", default=60.0, type=float, show_default=True)
@click.option("--data-root", default=".", show_default=True)
@click.option("--batchjob-id", type=int)
@friendly_errors
def launcher_run(site_id, nodes, cores_per_node, gpus_per_node, job_mode,
                 wall_time, idle_timeout, session_ttl, data_root, batchjob_id) -> None:
    from fedflow.launcher.apprun import LocalProcessAppRun
    from fedflow.launcher.launcher import Launcher, LauncherConfig

    Launcher(
        api=_open_api(),
        site_id=site_id,
        app_run=LocalProcessAppRun(data_root),
        num_nodes=nodes,
        cores_per_node=cores_per_node,
        gpus_per_node=gpus_per_node,
        batchjob_id=batchjob_id,
        config=LauncherConfig(
            job_mode=job_mode,
            wall_time_minutes=wall_time,
            idle_timeout=idle_timeout,
            session_ttl=session_ttl,
        ),
    ).run()


# -- simulation -------------------------------------------------------------------


@main.group()
def sim() -> None:
    """Virtual-time scenario runs."""


@sim.command("run")
@click.argument("scenario_path", type=click.Path(exists=True))
@click.option("--out", "out_dir", required=True, type=click.Path())
@friendly_errors
def sim_run(scenario_path: str, out_dir: str) -> None:
    """Execute a scenario; writes events.jsonl and metrics.json."""
    from fedflow.metrics import build_report, write_events, write_report
    from fedflow.sim import load_scenario, run_scenario

    scenario = load_scenario(scenario_path)
    result = run_scenario(scenario)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_events(out / "events.jsonl", result.events)
    report = build_report(result.events, capacity=scenario.capacity)
    write_report(out / "metrics.json", report)
    census = report.get("census", {})
    finished = census.get(str(JobState.FINISHED), 0)
    click.echo(
        f"{scenario.name}: {result.submitted} submitted, {finished} finished, "
        f"{len(result.events)} events over {result.end_time:.1f}s virtual"
    )


if __name__ == "__main__":
    main()
