import json
import threading
from http.server import BaseHTTPRequestHandler, HTTPServer

import pytest

from clinscribe import SpeakerRole, Transcript


@pytest.fixture
def simple_transcript():
    return Transcript.from_pairs(
        "simple",
        [
            (SpeakerRole.DOCTOR, "How are you?"),
            (SpeakerRole.PATIENT, "Fine."),
        ],
    )


class _JsonHandler(BaseHTTPRequestHandler):
    """Serves scripted JSON responses; the server instance holds the script."""

    def do_POST(self):
        length = int(self.headers.get("Content-Length", 0))
        body = json.loads(self.rfile.read(length) or b"{}")
        self.server.requests.append(
            {"path": self.path, "body": body, "headers": dict(self.headers)}
        )
        status, payload = self.server.responder(self.path, body)
        data = json.dumps(payload).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(data)))
        self.end_headers()
        self.wfile.write(data)

    def log_message(self, *args):
        pass


class MockService:
    def __init__(self):
        self._server = HTTPServer(("127.0.0.1", 0), _JsonHandler)
        self._server.requests = []
        self._server.responder = lambda path, body: (200, {})
        self._thread = threading.Thread(target=self._server.serve_forever, daemon=True)
        self._thread.start()

    @property
    def url(self) -> str:
        host, port = self._server.server_address
        return f"http://{host}:{port}/"

    @property
    def requests(self):
        return self._server.requests

    def respond_with(self, responder):
        """responder(path, body) -> (status, payload dict)."""
        self._server.responder = responder

    def set_json(self, payload, status=200):
        self._server.responder = lambda path, body: (status, payload)

    def close(self):
        self._server.shutdown()
        self._server.server_close()


@pytest.fixture
def mock_service():
    service = MockService()
    yield service
    service.close()
