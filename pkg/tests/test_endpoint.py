import json
from urllib.parse import quote, urlencode

import pytest

from roc_kb.endpoint import Endpoint, EndpointConfig, negotiate
from roc_kb.store import Store
from roc_kb.terms import IRI, Literal, Triple

from conftest import LiveServer

SIMPLE = "SELECT ?s WHERE { ?s ?p ?o }"


@pytest.fixture(scope="module")
def endpoint(fixture_store):
    return Endpoint(fixture_store)


def get(endpoint, query, accept=None):
    headers = {"Accept": accept} if accept else {}
    return endpoint.handle("GET", "/sparql?query=" + quote(query), headers)


def test_config_invariants():
    with pytest.raises(ValueError):
        EndpointConfig(max_query_bytes=0)
    with pytest.raises(ValueError):
        EndpointConfig(request_timeout=0)
    assert EndpointConfig.parse_bind("0.0.0.0:9000") == ("0.0.0.0", 9000)
    with pytest.raises(ValueError):
        EndpointConfig.parse_bind("nonsense")


@pytest.mark.parametrize("accept,fmt", [
    (None, "sparql-json"), ("text/csv", "csv"), ("application/sparql-results+json", "sparql-json"),
    ("text/html", "sparql-json"), ("text/csv;q=0.5, application/json", "sparql-json"),
    ("application/json;q=0.1, text/csv", "csv"), ("*/*", "sparql-json"),
])
def test_negotiation(accept, fmt):
    assert negotiate(accept, "sparql-json") == fmt


def test_health_summary_get_and_post_agree(endpoint, health_summary):
    r_get = get(endpoint, health_summary)
    r_post = endpoint.handle("POST", "/sparql", {"Content-Type": "application/sparql-query"},
                             health_summary.encode())
    r_form = endpoint.handle("POST", "/sparql", {"Content-Type": "application/x-www-form-urlencoded"},
                             urlencode({"query": health_summary}).encode())
    assert r_get.status == 200
    assert r_get.body == r_post.body == r_form.body
    assert r_get.headers["Content-Type"].startswith("application/sparql-results+json")
    assert len(json.loads(r_get.body)["results"]["bindings"]) == 3


def test_csv_by_accept(endpoint, health_summary):
    r = get(endpoint, health_summary, accept="text/csv")
    assert r.headers["Content-Type"].startswith("text/csv")
    assert r.body.count(b"\r\n") == 4


def test_parse_error_is_400_with_position(endpoint):
    r = get(endpoint, "SELEC ?s")
    assert r.status == 400
    assert b"line 1, column 1" in r.body


def test_unsupported_feature_is_400(endpoint):
    assert get(endpoint, "SELECT ?s WHERE { OPTIONAL { ?s ?p ?o } }").status == 400


def test_missing_query(endpoint):
    assert endpoint.handle("GET", "/sparql").status == 400


def test_oversize(fixture_store):
    small = Endpoint(fixture_store, EndpointConfig(max_query_bytes=10))
    assert get(small, SIMPLE).status == 413


def test_unsupported_media_type(endpoint):
    r = endpoint.handle("POST", "/sparql", {"Content-Type": "application/json"}, b"{}")
    assert r.status == 415


def test_wrong_method_and_path(endpoint):
    assert endpoint.handle("DELETE", "/sparql").status == 405
    assert endpoint.handle("GET", "/nowhere").status == 404


def test_timeout_maps_to_503():
    p = IRI("http://e/p")
    store = Store(Triple(IRI(f"http://e/s{i}"), p, IRI(f"http://e/s{(i * 7) % 300}")) for i in range(300))
    slow = Endpoint(store, EndpointConfig(request_timeout=0.05))
    r = get(slow, "SELECT * WHERE { ?a <http://e/p> ?b . ?c <http://e/p> ?d . ?e <http://e/p> ?f }")
    assert r.status == 503
    assert "Retry-After" in r.headers


def test_graph_dump_and_head():
    p = IRI("http://e/p")
    store = Store(Triple(IRI(f"http://e/s{i}"), p, Literal(str(i))) for i in range(30))
    ep = Endpoint(store)
    r = ep.handle("GET", "/graph")
    assert r.headers["Content-Type"] == "application/n-triples"
    assert len(r.body.decode().splitlines()) == 30
    head = ep.handle("HEAD", "/graph")
    assert head.status == 200 and head.body == b"" and head.headers["Content-Length"] == str(len(r.body))
    assert Endpoint(Store()).handle("GET", "/graph").body == b""


def test_health(endpoint):
    r = endpoint.handle("GET", "/health")
    assert r.status == 200 and r.body.strip() == b"ok"


def test_requests_never_mutate_the_store(fixture_store, endpoint, health_summary):
    before = fixture_store.stats()
    for q in (health_summary, SIMPLE, "SELEC"):
        get(endpoint, q)
    assert fixture_store.stats() == before


def test_live_server_round_trip(fixture_store, health_summary):
    with LiveServer(fixture_store) as srv:
        status, headers, body = srv.request("GET", "/sparql?query=" + quote(health_summary))
        assert status == 200
        status2, _, body2 = srv.request("POST", "/sparql", health_summary.encode(),
                                        {"Content-Type": "application/sparql-query"})
        assert body2 == body
        status3, _, diag = srv.request("GET", "/sparql?query=" + quote("SELEC ?s"))
        assert status3 == 400 and b"column" in diag
        assert srv.request("HEAD", "/graph")[2] == b""
