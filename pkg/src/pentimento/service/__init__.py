from .http import DEFAULT_PORT, StudioServer, serve
from .manager import AssetMissing, JobManager
from .store import AssetStore, JobStore

__all__ = [
    "DEFAULT_PORT",
    "StudioServer",
    "serve",
    "AssetMissing",
    "JobManager",
    "AssetStore",
    "JobStore",
]
