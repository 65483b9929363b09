"""HTTP model server speaking the scene-generation wire protocol.

Endpoints: /depth, /segment, /inpaint, /pair, /describe, /detect, /healthz.
In fallback mode every endpoint is served procedurally and deterministically
from the request hash; no model downloads are required.
"""

from .config import ServerConfig
from .app import create_app

__all__ = ["ServerConfig", "create_app"]
