"""Federated workflow orchestration across facilities.

A central multi-tenant API service hands work to per-facility site agents
and pilot-job launchers that pull jobs over HTTPS-style requests; a client
SDK/CLI submits and tracks jobs; a deterministic discrete-event backend
replays the whole platform in virtual time for experiments and tests.
"""

__version__ = "0.1.0"
