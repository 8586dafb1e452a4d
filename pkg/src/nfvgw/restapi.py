"""HTTP adapters for the two control interfaces.

The provider-domain app exposes the service-request collection and the
availability-notification resource; the gateway-domain app exposes the VNF
request collection.  Mutations map exactly onto the declared verb/path
matrix; anything else is rejected (405 on known paths, 404 otherwise).
GET endpoints exist for observability only.

Responses: 201 with a Location header on create, 200 on update, 204 on
delete; error codes map 404/409/400 for NOT_FOUND/CONFLICT/MALFORMED.
"""

from __future__ import annotations

import json
import re
import threading
from wsgiref.simple_server import WSGIRequestHandler, make_server

from .control import (SERVICE_REQUESTS_PATH, NOTIFICATION_PATH,
                      VNF_REQUESTS_PATH, AvailabilityNotification,
                      CentralController, LocalController)
from .errors import GatewayError, MalformedRequest
from .interfaces import InterfaceDescriptor, QosParams, VwsanDescriptor

_MUTATIONS = {"POST", "PUT", "DELETE", "PATCH"}


def _read_json(environ) -> dict:
    try:
        length = int(environ.get("CONTENT_LENGTH") or 0)
    except ValueError:
        length = 0
    raw = environ["wsgi.input"].read(length) if length else b"{}"
    try:
        body = json.loads(raw.decode("utf-8") or "{}")
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise MalformedRequest(f"body is not JSON: {exc}") from exc
    if not isinstance(body, dict):
        raise MalformedRequest("body must be a JSON object")
    return body


class _RestApp:
    """Tiny router: (method, path regex) -> handler."""

    def __init__(self):
        self._routes: list[tuple[str, re.Pattern, object]] = []

    def route(self, method: str, pattern: str):
        compiled = re.compile("^" + pattern + "$")

        def register(fn):
            self._routes.append((method, compiled, fn))
            return fn

        return register

    def __call__(self, environ, start_response):
        method = environ["REQUEST_METHOD"].upper()
        path = environ.get("PATH_INFO", "/")
        matched_path = False
        for route_method, pattern, fn in self._routes:
            match = pattern.match(path)
            if not match:
                continue
            matched_path = True
            if route_method != method:
                continue
            try:
                status, headers, body = fn(environ, *match.groups())
            except GatewayError as exc:
                status = exc.http_status
                body = {"error": exc.code, "message": str(exc)}
                headers = []
            return _respond(start_response, status, headers, body)
        if matched_path:
            return _respond(start_response, 405, [], {"error": "METHOD_NOT_ALLOWED"})
        return _respond(start_response, 404, [], {"error": "NOT_FOUND"})


def _respond(start_response, status: int, headers, body):
    reason = {200: "OK", 201: "Created", 204: "No Content", 400: "Bad Request",
              404: "Not Found", 405: "Method Not Allowed",
              409: "Conflict", 503: "Service Unavailable"}.get(status, "OK")
    payload = b"" if status == 204 or body is None else \
        json.dumps(body, sort_keys=True).encode()
    out_headers = list(headers)
    if payload:
        out_headers.append(("Content-Type", "application/json"))
    out_headers.append(("Content-Length", str(len(payload))))
    start_response(f"{status} {reason}", out_headers)
    return [payload]


def provider_domain_app(local: LocalController) -> _RestApp:
    """R1/R2 resources hosted in the sensor-network provider domain."""
    app = _RestApp()
    base = re.escape(SERVICE_REQUESTS_PATH)

    @app.route("POST", base)
    def create(environ):
        body = _read_json(environ)
        try:
            northbound = tuple(InterfaceDescriptor.from_dict(d)
                               for d in body["northbound"])
            qos = QosParams.from_dict(body["qos"])
            application_id = str(body["applicationId"])
        except (KeyError, TypeError) as exc:
            raise MalformedRequest(f"missing field: {exc}") from exc
        request_id = local.create_service_request(application_id, northbound, qos)
        location = f"{SERVICE_REQUESTS_PATH}/{request_id}"
        return 201, [("Location", location)], {"requestId": request_id}

    @app.route("GET", base)
    def list_all(environ):
        return 200, [], {"requests": [r.as_dict()
                                      for r in local.requests.values()]}

    @app.route("GET", base + r"/([^/]+)")
    def show(environ, request_id):
        return 200, [], local.get_service_request(request_id).as_dict()

    @app.route("PUT", base + r"/([^/]+)")
    def update(environ, request_id):
        req = local.update_service_request(request_id, _read_json(environ))
        return 200, [], req.as_dict()

    @app.route("DELETE", base + r"/([^/]+)")
    def delete(environ, request_id):
        local.delete_service_request(request_id)
        return 204, [], None

    @app.route("POST", re.escape(NOTIFICATION_PATH))
    def notify(environ):
        body = _read_json(environ)
        try:
            notification = AvailabilityNotification(
                str(body["serviceRequestId"]), bool(body["available"]),
                tuple(body["chainIds"]) if body.get("chainIds") is not None else None,
                body.get("retryAfterS"))
        except (KeyError, TypeError) as exc:
            raise MalformedRequest(f"bad notification: {exc}") from exc
        local.notify_availability(notification)
        return 201, [], {"serviceRequestId": notification.service_request_id}

    return app


def gateway_domain_app(central: CentralController) -> _RestApp:
    """VNF-request resources hosted in the gateway provider domain."""
    app = _RestApp()
    base = re.escape(VNF_REQUESTS_PATH)

    @app.route("POST", base)
    def create(environ):
        body = _read_json(environ)
        try:
            vnf_request_id = central.create_vnf_request(
                str(body["serviceRequestId"]),
                tuple(InterfaceDescriptor.from_dict(d) for d in body["northbound"]),
                VwsanDescriptor.from_dict(body["vwsan"]),
                QosParams.from_dict(body["qos"]))
        except (KeyError, TypeError) as exc:
            raise MalformedRequest(f"missing field: {exc}") from exc
        location = f"{VNF_REQUESTS_PATH}/{vnf_request_id}"
        return 201, [("Location", location)], {"vnfRequestId": vnf_request_id}

    @app.route("GET", base)
    def list_all(environ):
        return 200, [], {"requests": [r.as_dict()
                                      for r in central.requests.values()
                                      if not r.deleted]}

    @app.route("GET", base + r"/([^/]+)")
    def show(environ, vnf_request_id):
        return 200, [], central.get_vnf_request(vnf_request_id).as_dict()

    @app.route("PUT", base + r"/([^/]+)")
    def update(environ, vnf_request_id):
        vr = central.update_vnf_request(vnf_request_id, _read_json(environ))
        return 200, [], vr.as_dict()

    @app.route("DELETE", base + r"/([^/]+)")
    def delete(environ, vnf_request_id):
        central.delete_vnf_request(vnf_request_id)
        return 204, [], None

    return app


class _QuietHandler(WSGIRequestHandler):
    def log_message(self, format, *args):  # noqa: A002 - wsgiref signature
        pass


class ApiServer:
    """Run a WSGI app on a local port in a background thread."""

    def __init__(self, app, host: str = "127.0.0.1", port: int = 0):
        self._server = make_server(host, port, app, handler_class=_QuietHandler)
        self._thread = threading.Thread(target=self._server.serve_forever,
                                        daemon=True)

    @property
    def url(self) -> str:
        host, port = self._server.server_address[:2]
        return f"http://{host}:{port}"

    def start(self) -> "ApiServer":
        self._thread.start()
        return self

    def stop(self) -> None:
        self._server.shutdown()
        self._server.server_close()
        self._thread.join(timeout=5)
