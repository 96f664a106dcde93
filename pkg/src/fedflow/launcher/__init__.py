from fedflow.launcher.apprun import AppRun, LocalProcessAppRun, RunStatus, SpawnError
from fedflow.launcher.launcher import ACQUIRE_STATES, Launcher, LauncherConfig
from fedflow.launcher.resources import NodeResource, make_nodes, pack_assignments

__all__ = [
    "ACQUIRE_STATES",
    "AppRun",
    "Launcher",
    "LauncherConfig",
    "LocalProcessAppRun",
    "NodeResource",
    "RunStatus",
    "SpawnError",
    "make_nodes",
    "pack_assignments",
]
