"""Read-only HTTP service behind the strength studio.

Serves the pair catalog, on-demand interpolation at any real strength in
[0, 1], cached weight maps, edge-difference visualizations, and the static
UI bundle.  All state is an immutable dataset directory; request handling
never writes.
"""

from __future__ import annotations

import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from urllib.parse import parse_qs, urlparse

import cv2
import numpy as np

from .flow import VelocityNet, load_model, sample
from .imgcore import ImageBuffer, linear_to_srgb, read_png
from .pipeline import DatasetManifest, read_manifest
from .retinex import alpha_blend, retinex_interpolate
from .weights import edge_diff

_FALLBACK_PAGE = b"""<!doctype html>
<html><head><title>strength studio</title></head>
<body><h1>strength studio API</h1>
<p>No UI bundle is installed. Endpoints: /api/pairs, /api/enhance,
/api/weightmap, /api/edgediff.</p></body></html>
"""

_CONTENT_TYPES = {
    ".html": "text/html; charset=utf-8",
    ".js": "application/javascript",
    ".mjs": "application/javascript",
    ".css": "text/css",
    ".json": "application/json",
    ".map": "application/json",
    ".png": "image/png",
    ".svg": "image/svg+xml",
    ".ico": "image/x-icon",
}


class ApiError(Exception):
    def __init__(self, status: int, message: str):
        super().__init__(message)
        self.status = status
        self.message = message


def _encode_png(rgb01: np.ndarray) -> bytes:
    q = np.floor(np.clip(rgb01, 0.0, 1.0) * 255.0 + 0.5).astype(np.uint8)
    if q.ndim == 3 and q.shape[2] == 3:
        q = np.ascontiguousarray(q[:, :, ::-1])
    ok, buf = cv2.imencode(".png", q)
    if not ok:
        raise ApiError(500, "PNG encoding failed")
    return buf.tobytes()


class StudioService:
    """Dataset-backed request logic, independent of the HTTP plumbing."""

    def __init__(
        self,
        dataset_dir: str | Path,
        model: VelocityNet | None = None,
        static_dir: str | Path | None = None,
        sample_steps: int = 20,
    ):
        self.dataset_dir = Path(dataset_dir)
        self.manifest: DatasetManifest = read_manifest(self.dataset_dir)
        self.model = model
        self.static_dir = Path(static_dir) if static_dir else None
        self.sample_steps = sample_steps
        self._servable = [
            rec for rec in self.manifest.records
            if rec.accepted and self.manifest.entries.get(rec.pair_id)
        ]

    # -- api ---------------------------------------------------------------

    def pairs(self) -> list[dict]:
        return [
            {"id": rec.pair_id, "width": rec.width, "height": rec.height}
            for rec in self._servable
        ]

    def _entries(self, pair_id: str):
        entries = self.manifest.entries.get(pair_id)
        if not entries or not any(r.pair_id == pair_id for r in self._servable):
            raise ApiError(404, f"unknown pair: {pair_id}")
        return entries

    def _endpoint_image(self, pair_id: str, s: float) -> Path:
        for entry in self._entries(pair_id):
            if entry.strength == s:
                return self.dataset_dir / entry.image
        raise ApiError(404, f"no stored entry at s={s}")

    def _load_endpoints(self, pair_id: str) -> tuple[ImageBuffer, ImageBuffer]:
        return (
            read_png(self._endpoint_image(pair_id, 0.0)),
            read_png(self._endpoint_image(pair_id, 1.0)),
        )

    def enhance(self, pair_id: str, s: float, method: str) -> bytes:
        if method not in ("retinex", "alpha", "model"):
            raise ApiError(400, f"unknown method: {method}")
        if method == "model":
            if self.model is None:
                raise ApiError(400, "no model loaded")
            i0, _ = self._load_endpoints(pair_id)
            out = sample(self.model, i0, s, self.sample_steps, seed=0)
            return _encode_png(linear_to_srgb(out).data)
        if s in (0.0, 1.0):
            # group endpoints are the originals; stream their bytes verbatim
            return self._endpoint_image(pair_id, s).read_bytes()
        i0, i1 = self._load_endpoints(pair_id)
        if method == "retinex":
            out = retinex_interpolate(i0, i1, s, self.manifest.bilateral)
        else:
            out = alpha_blend(i0, i1, s)
        return _encode_png(out.data)

    def weightmap(self, pair_id: str, s: float) -> bytes:
        cached = [e for e in self._entries(pair_id) if e.weight_map is not None]
        if not cached:
            raise ApiError(404, "no cached weight maps for pair")
        nearest = min(cached, key=lambda e: (abs(e.strength - s), e.strength))
        return (self.dataset_dir / nearest.weight_map).read_bytes()

    def edgediff(self, pair_id: str, s: float) -> bytes:
        i0, i1 = self._load_endpoints(pair_id)
        if s == 0.0:
            target = i0
        elif s == 1.0:
            target = i1
        else:
            target = retinex_interpolate(i0, i1, s, self.manifest.bilateral)
        diff = edge_diff(i0, target, self.manifest.bilateral).data
        peak = max(float(diff.max()), 1e-6)
        return _encode_png(diff / peak)

    # -- static ------------------------------------------------------------

    def static_file(self, url_path: str) -> tuple[bytes, str]:
        name = url_path.lstrip("/") or "index.html"
        if self.static_dir is not None:
            root = self.static_dir.resolve()
            target = (root / name).resolve()
            if root in target.parents or target == root:
                if target.is_file():
                    ctype = _CONTENT_TYPES.get(target.suffix, "application/octet-stream")
                    return target.read_bytes(), ctype
        if name == "index.html":
            return _FALLBACK_PAGE, "text/html; charset=utf-8"
        raise ApiError(404, f"no such file: {name}")


def _parse_strength(query: dict) -> float:
    raw = query.get("s", [None])[0]
    if raw is None:
        raise ApiError(400, "missing parameter: s")
    try:
        s = float(raw)
    except ValueError:
        raise ApiError(400, f"malformed strength: {raw!r}") from None
    if not 0.0 <= s <= 1.0:
        raise ApiError(400, f"strength out of range [0, 1]: {s}")
    return s


def _parse_pair(query: dict) -> str:
    pair = query.get("pair", [None])[0]
    if not pair:
        raise ApiError(400, "missing parameter: pair")
    return pair


class _Handler(BaseHTTPRequestHandler):
    service: StudioService  # set on the server class

    def log_message(self, *args):  # quiet by default
        pass

    def _send(self, status: int, body: bytes, ctype: str):
        self.send_response(status)
        self.send_header("Content-Type", ctype)
        self.send_header("Content-Length", str(len(body)))
        self.send_header("Cache-Control", "no-store")
        self.end_headers()
        self.wfile.write(body)

    def _send_json(self, status: int, payload) -> None:
        self._send(status, json.dumps(payload).encode(), "application/json")

    def do_GET(self):
        try:
            parsed = urlparse(self.path)
            query = parse_qs(parsed.query)
            route = parsed.path
            svc = self.server.service  # type: ignore[attr-defined]
            if route == "/api/pairs":
                self._send_json(200, svc.pairs())
            elif route == "/api/enhance":
                method = query.get("method", ["retinex"])[0]
                body = svc.enhance(_parse_pair(query), _parse_strength(query), method)
                self._send(200, body, "image/png")
            elif route == "/api/weightmap":
                body = svc.weightmap(_parse_pair(query), _parse_strength(query))
                self._send(200, body, "image/png")
            elif route == "/api/edgediff":
                body = svc.edgediff(_parse_pair(query), _parse_strength(query))
                self._send(200, body, "image/png")
            elif route.startswith("/api/"):
                raise ApiError(404, f"unknown endpoint: {route}")
            else:
                body, ctype = svc.static_file(route)
                self._send(200, body, ctype)
        except ApiError as exc:
            self._send_json(exc.status, {"error": exc.message})
        except Exception as exc:  # pragma: no cover - defensive
            self._send_json(500, {"error": str(exc)})


def make_server(
    dataset_dir: str | Path,
    port: int = 8080,
    model_path: str | Path | None = None,
    static_dir: str | Path | None = None,
) -> ThreadingHTTPServer:
    """Build (but do not start) the HTTP server; port 0 picks a free port."""
    model = load_model(model_path) if model_path else None
    service = StudioService(dataset_dir, model=model, static_dir=static_dir)
    server = ThreadingHTTPServer(("127.0.0.1", port), _Handler)
    server.service = service  # type: ignore[attr-defined]
    return server


def serve_forever(server: ThreadingHTTPServer) -> None:
    host, port = server.server_address[:2]
    print(f"serving on http://{host}:{port}", flush=True)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()


def start_in_thread(server: ThreadingHTTPServer) -> threading.Thread:
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    return thread
