import pathlib
import sys

import pytest

sys.path.insert(0, str(pathlib.Path(__file__).parent))

from roc_kb.fixtures import fixture_path  # noqa: E402
from roc_kb.ingest import apply_mapping, preset_mapping, read_csv  # noqa: E402
from roc_kb.ontology import builtin_roc_schema  # noqa: E402
from roc_kb.store import Store  # noqa: E402

HEALTH_SUMMARY = pathlib.Path(__file__).parent.parent / "src" / "roc_kb" / "data" / "queries" / "health_summary.rq"


def build_fixture_store(sources=(("oxcgrt_3x30.csv", "oxcgrt"), ("ecdc_3x30.csv", "ecdc")),
                        materialize=True) -> Store:
    store = Store()
    for name, preset in sources:
        graph, report = apply_mapping(read_csv(fixture_path(name)), preset_mapping(preset))
        assert not report.errors
        store.add_all(graph)
    if materialize:
        store.materialize(builtin_roc_schema())
    return store.freeze()


@pytest.fixture(scope="session")
def schema():
    return builtin_roc_schema()


@pytest.fixture(scope="session")
def fixture_store():
    return build_fixture_store()


@pytest.fixture(scope="session")
def health_summary():
    return HEALTH_SUMMARY.read_text(encoding="utf-8")


class LiveServer:
    """Endpoint on an ephemeral loopback port, served from a background thread."""

    def __init__(self, store, **config):
        import threading

        from roc_kb.endpoint import Endpoint, EndpointConfig, make_server

        self.endpoint = Endpoint(store, EndpointConfig(port=0, **config))
        self.server = make_server(self.endpoint)
        self.port = self.server.server_address[1]
        self.thread = threading.Thread(target=self.server.serve_forever, daemon=True)

    def __enter__(self):
        self.thread.start()
        return self

    def __exit__(self, *exc):
        self.server.shutdown()
        self.server.server_close()

    def request(self, method, path, body=None, headers=None):
        import http.client

        conn = http.client.HTTPConnection("127.0.0.1", self.port, timeout=10)
        try:
            conn.request(method, path, body=body, headers=headers or {})
            resp = conn.getresponse()
            return resp.status, dict(resp.getheaders()), resp.read()
        finally:
            conn.close()


# one line per acceptance criterion, printed after the run whatever the capture mode
CRITERIA: list = []


def pytest_terminal_summary(terminalreporter):
    if not CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for line in CRITERIA:
        terminalreporter.write_line(line)
    passed = sum(1 for line in CRITERIA if line.startswith("PASS"))
    terminalreporter.write_line(f"{passed}/{len(CRITERIA)} criteria passed")
