"""Read-only HTTP endpoint exposing live timer data.

Runs a small threaded server next to the simulation: ``GET /timers``
returns the current snapshot as JSON, ``GET /report`` the rendered text
table.  Requests never mutate timers; a snapshot is taken per request.
"""

from __future__ import annotations

import logging
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from typing import Callable

from .report import render_report, snapshot_to_json
from .schedule import ReportLayout
from .timers import TimerDatabase

logger = logging.getLogger(__name__)


class MonitorServer:
    """Serves /timers (JSON) and /report (text) from a timer database."""

    def __init__(self, db: TimerDatabase,
                 layout: ReportLayout | Callable[[], ReportLayout] | None = None,
                 host: str = "127.0.0.1", port: int = 0):
        self._db = db
        self._layout = layout
        monitor = self

        class Handler(BaseHTTPRequestHandler):
            def do_GET(self):
                try:
                    if self.path == "/timers":
                        body = snapshot_to_json(monitor._db.snapshot()).encode()
                        content_type = "application/json"
                    elif self.path == "/report":
                        body = render_report(
                            monitor._db.snapshot(), monitor._resolve_layout()
                        ).encode()
                        content_type = "text/plain; charset=utf-8"
                    else:
                        self.send_error(404, "unknown endpoint")
                        return
                except Exception:
                    logger.exception("monitor request failed")
                    self.send_error(500, "internal error")
                    return
                self.send_response(200)
                self.send_header("Content-Type", content_type)
                self.send_header("Content-Length", str(len(body)))
                self.end_headers()
                self.wfile.write(body)

            def log_message(self, fmt, *args):
                logger.debug("monitor: " + fmt, *args)

        self._server = ThreadingHTTPServer((host, port), Handler)
        self._thread: threading.Thread | None = None

    def _resolve_layout(self) -> ReportLayout | None:
        if callable(self._layout):
            return self._layout()
        return self._layout

    @property
    def address(self) -> tuple[str, int]:
        """Bound (host, port); useful when started with port 0."""
        host, port = self._server.server_address[:2]
        return str(host), int(port)

    def start(self) -> None:
        if self._thread is not None:
            return
        self._thread = threading.Thread(
            target=self._server.serve_forever, name="calipers-monitor", daemon=True
        )
        self._thread.start()

    def stop(self) -> None:
        if self._thread is None:
            return
        self._server.shutdown()
        self._thread.join()
        self._server.server_close()
        self._thread = None

    def __enter__(self):
        self.start()
        return self

    def __exit__(self, *exc_info):
        self.stop()
