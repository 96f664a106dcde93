"""Client SDK: typed API facade, lazy job queries, and site routing."""

from fedflow.client.api import Api, DirectApi, HttpApi
from fedflow.client.routing import RoundRobinRouter, Router, ShortestBacklogRouter
from fedflow.client.sdk import JobQuery

__all__ = [
    "Api",
    "DirectApi",
    "HttpApi",
    "JobQuery",
    "RoundRobinRouter",
    "Router",
    "ShortestBacklogRouter",
]
