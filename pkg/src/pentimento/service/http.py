"""HTTP/1.1 front end for the job manager.

Endpoints (JSON bodies, UTF-8):

    GET    /healthz                      -> {"status": "ok"}
    POST   /v1/assets                    -> {"asset_id": <sha256 hex>}
    POST   /v1/jobs                      -> {"job_id": <uuid>}   (202)
    GET    /v1/jobs/{id}                 -> job record
    GET    /v1/jobs/{id}/snapshots/{k}   -> PNG bytes
    DELETE /v1/jobs/{id}                 -> job record after cancel request

Errors are JSON ``{code, message, field?}``. When a UI directory is
configured, anything outside /v1 and /healthz is served from it as
static files.
"""

from __future__ import annotations

import io
import json
import mimetypes
import os
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path

from PIL import Image, UnidentifiedImageError

from ..errors import ConfigError
from .manager import AssetMissing, JobManager

MAX_ASSET_BYTES = 32 * 1024 * 1024
DEFAULT_PORT = 8712
ACCEPTED_FORMATS = ("PNG", "JPEG")


def _decode_diagnostic(data: bytes) -> str | None:
    """None if the bytes are a decodable PNG/JPEG, else a diagnostic."""
    try:
        with Image.open(io.BytesIO(data)) as im:
            if im.format not in ACCEPTED_FORMATS:
                return f"unsupported image format {im.format!r}, need PNG or JPEG"
            im.verify()
        return None
    except (UnidentifiedImageError, OSError, SyntaxError, ValueError) as exc:
        return f"cannot decode image: {exc}"


class _Handler(BaseHTTPRequestHandler):
    protocol_version = "HTTP/1.1"
    server_version = "pentimento-studio"

    # Injected by make_server().
    manager: JobManager = None  # type: ignore[assignment]
    ui_dir: Path | None = None

    def log_message(self, fmt, *args):  # quiet by default
        if os.environ.get("PENTIMENTO_HTTP_LOG"):
            super().log_message(fmt, *args)

    # -- helpers -------------------------------------------------------------

    def _send_json(self, status: int, payload: dict) -> None:
        body = json.dumps(payload).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json; charset=utf-8")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def _send_error_json(self, status: int, code: str, message: str, field=None):
        payload = {"code": code, "message": message}
        if field:
            payload["field"] = field
        self._send_json(status, payload)

    def _send_bytes(self, data: bytes, content_type: str) -> None:
        self.send_response(200)
        self.send_header("Content-Type", content_type)
        self.send_header("Content-Length", str(len(data)))
        self.end_headers()
        self.wfile.write(data)

    def _read_body(self) -> bytes | None:
        length = self.headers.get("Content-Length")
        if length is None:
            self._send_error_json(411, "length_required", "Content-Length required")
            return None
        length = int(length)
        if length > MAX_ASSET_BYTES:
            self._send_error_json(
                413, "too_large", f"body exceeds {MAX_ASSET_BYTES} bytes"
            )
            return None
        return self.rfile.read(length)

    # -- verbs ---------------------------------------------------------------

    def do_GET(self):
        parts = [p for p in self.path.split("?")[0].split("/") if p]
        if parts == ["healthz"]:
            self._send_json(200, {"status": "ok"})
        elif len(parts) == 3 and parts[:2] == ["v1", "jobs"]:
            job = self.manager.get(parts[2])
            if job is None:
                self._send_error_json(404, "unknown_job", f"no job {parts[2]!r}")
            else:
                self._send_json(200, job)
        elif len(parts) == 5 and parts[:2] == ["v1", "jobs"] and parts[3] == "snapshots":
            try:
                index = int(parts[4])
            except ValueError:
                self._send_error_json(404, "unknown_snapshot", "bad snapshot index")
                return
            path = self.manager.snapshot_file(parts[2], index)
            if path is None:
                self._send_error_json(
                    404, "unknown_snapshot", f"job {parts[2]!r} has no snapshot {index}"
                )
            else:
                self._send_bytes(path.read_bytes(), "image/png")
        else:
            self._serve_static(parts)

    def do_POST(self):
        parts = [p for p in self.path.split("?")[0].split("/") if p]
        if parts == ["v1", "assets"]:
            data = self._read_body()
            if data is None:
                return
            diagnostic = _decode_diagnostic(data)
            if diagnostic is not None:
                self._send_error_json(415, "unsupported_media", diagnostic)
                return
            self._send_json(200, {"asset_id": self.manager.assets.put(data)})
        elif parts == ["v1", "jobs"]:
            data = self._read_body()
            if data is None:
                return
            try:
                wire = json.loads(data.decode("utf-8"))
            except (UnicodeDecodeError, json.JSONDecodeError) as exc:
                self._send_error_json(400, "bad_json", f"invalid JSON body: {exc}")
                return
            try:
                job = self.manager.submit(wire)
            except AssetMissing as exc:
                self._send_error_json(404, "unknown_asset", str(exc), field=exc.field)
            except ConfigError as exc:
                self._send_error_json(422, "invalid_config", str(exc), field=exc.field)
            else:
                self._send_json(202, {"job_id": job["id"]})
        else:
            self._send_error_json(404, "not_found", f"no route {self.path!r}")

    def do_DELETE(self):
        parts = [p for p in self.path.split("?")[0].split("/") if p]
        if len(parts) == 3 and parts[:2] == ["v1", "jobs"]:
            job = self.manager.cancel(parts[2])
            if job is None:
                self._send_error_json(404, "unknown_job", f"no job {parts[2]!r}")
            else:
                self._send_json(200, job)
        else:
            self._send_error_json(404, "not_found", f"no route {self.path!r}")

    # -- static UI -------------------------------------------------------------

    def _serve_static(self, parts: list[str]) -> None:
        if self.ui_dir is None:
            self._send_error_json(404, "not_found", f"no route {self.path!r}")
            return
        rel = "/".join(parts) or "index.html"
        target = (self.ui_dir / rel).resolve()
        if not str(target).startswith(str(self.ui_dir.resolve())) or not target.is_file():
            self._send_error_json(404, "not_found", f"no file {rel!r}")
            return
        ctype = mimetypes.guess_type(target.name)[0] or "application/octet-stream"
        self._send_bytes(target.read_bytes(), ctype)


class StudioServer:
    """A JobManager plus its HTTP server; usable blocking or in-thread."""

    def __init__(
        self,
        store_root,
        host: str = "127.0.0.1",
        port: int = DEFAULT_PORT,
        workers: int | None = None,
        ui_dir=None,
    ):
        self.manager = JobManager(store_root, workers=workers)
        handler = type(
            "BoundHandler",
            (_Handler,),
            {
                "manager": self.manager,
                "ui_dir": Path(ui_dir).resolve() if ui_dir else None,
            },
        )
        self.httpd = ThreadingHTTPServer((host, port), handler)
        self._thread: threading.Thread | None = None

    @property
    def port(self) -> int:
        return self.httpd.server_address[1]

    def start_background(self) -> None:
        self._thread = threading.Thread(target=self.httpd.serve_forever, daemon=True)
        self._thread.start()

    def serve_forever(self) -> None:
        self.httpd.serve_forever()

    def stop(self) -> None:
        self.httpd.shutdown()
        self.httpd.server_close()
        if self._thread is not None:
            self._thread.join(timeout=10)
        self.manager.shutdown()


def serve(store_root=None, host="0.0.0.0", port=None, workers=None, ui_dir=None):
    """Blocking entry point honouring the PENTIMENTO_* environment."""
    store_root = store_root or os.environ.get("PENTIMENTO_STORE", "./store")
    if port is None:
        port = int(os.environ.get("PENTIMENTO_PORT", DEFAULT_PORT))
    server = StudioServer(
        store_root, host=host, port=port, workers=workers, ui_dir=ui_dir
    )
    # Flush so wrappers watching a pipe see the bound port immediately.
    print(
        f"studio service on http://{host}:{server.port} (store: {store_root})",
        flush=True,
    )
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.stop()
