import json

import numpy as np
import pytest

from app.spidercert.certifier import certify_maxcut
from app.spidercert.csp import gen_csp, gen_weighted_xor
from app.spidercert.data_access import (
    CSV_COLUMNS,
    dump_spider,
    dumps,
    graph_from_dict,
    load_certificate,
    load_graph,
    load_instance,
    read_experiments,
    read_json,
    save_certificate,
    save_graph,
    save_instance,
    write_experiments,
    write_json,
)
from app.spidercert.schemas import Experiment
from app.spidercert.spider import build_psi, build_spider


def test_load_fixture_graphs(data_dir):
    assert load_graph(data_dir / "edge.json").n == 2
    assert load_graph(data_dir / "triangle.json").num_edges == 3
    assert load_graph(data_dir / "k5.json").num_edges == 10
    k256 = load_graph(data_dir / "k256.json")
    assert k256.n == 256 and k256.num_edges == 256 * 255 / 2


def test_graph_generator_specs():
    G = graph_from_dict({"generator": "regular", "n": 10, "degree": 3, "seed": 2})
    assert np.all(G.deg == 3)
    with pytest.raises(ValueError, match="unknown generator"):
        graph_from_dict({"generator": "lattice", "n": 4})


def test_graph_validation_errors(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"n": 2, "edges": [[0, 1, 1]]}))
    with pytest.raises(ValueError):
        load_graph(bad)
    bad.write_text("{not json")
    with pytest.raises(ValueError, match="not valid JSON"):
        read_json(bad)
    bad.write_text("[1, 2]")
    with pytest.raises(ValueError, match="JSON object"):
        read_json(bad)


def test_graph_round_trip(tmp_path, signed_c4):
    path = save_graph(signed_c4, tmp_path / "g" / "c4.json")
    assert load_graph(path).edges == signed_c4.edges


def test_instance_round_trip(tmp_path):
    X = gen_weighted_xor(6, 3, seed=1)
    assert load_instance(save_instance(X, tmp_path / "x.json")).terms == X.terms
    C = gen_csp(6, 2, "1000", m=12, seed=1)
    again = load_instance(save_instance(C, tmp_path / "c.json"))
    assert np.array_equal(again.codes, C.codes)
    assert again.predicate == C.predicate


def test_metadata_block_is_unwrapped(tmp_path, triangle):
    cert = certify_maxcut(triangle, k=3, ell=1).to_model()
    path = save_certificate(cert, tmp_path / "cert.json", meta=True)
    raw = json.loads(path.read_text())
    assert set(raw) == {"result", "meta"}
    assert isinstance(raw["meta"]["argv"], list)
    assert raw["meta"]["version"]
    assert load_certificate(path) == cert


def test_dumps_is_deterministic_without_meta(triangle):
    cert = certify_maxcut(triangle, k=3, ell=1).to_model()
    assert dumps(cert, meta=False) == dumps(cert, meta=False)
    body = json.loads(dumps({"b": np.float64(1.5), "a": np.arange(2)}, meta=False))
    assert body == {"a": [0, 1], "b": 1.5}
    assert list(json.loads(dumps({"z": 1}, meta=True, argv=["x"]))["meta"]["argv"]) == ["x"]


def test_spider_dump(tmp_path):
    written = dump_spider(build_psi(build_spider(3, 1)), tmp_path / "spider")
    assert [p.suffix for p in written] == [".json", ".npy"]
    psi = np.load(written[1])
    assert psi.shape == (4, 4)
    assert read_json(written[0])["inner"][0] == pytest.approx(1.5)


def test_experiment_csv_round_trip(tmp_path):
    rows = [
        Experiment(name="a", generator="gnp", n=10, seed=0, kind="maxcut", optimum=0.75, optimum_exact="3/4",
                   errors={"certify": "spectral premise fails"}, timings={"eig": 0.5, "certify": 0.25}),
        Experiment(name="a", generator="gnp", n=10, seed=1, kind="maxcut", cert_bound=0.9, k=3, ell=1, R=4),
    ]
    path = write_experiments(rows, tmp_path / "out" / "rows.csv")
    header = path.read_text().splitlines()[0].split(",")
    assert header == CSV_COLUMNS
    back = read_experiments(path)
    assert back[0].optimum_exact == "3/4"
    assert back[0].errors == {"certify": "spectral premise fails"}
    assert back[0].timings == {"total": 0.75}
    assert back[1].cert_bound == 0.9
    assert back[1].optimum is None


def test_experiment_csv_requires_columns(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("name,n\nx,3\n")
    with pytest.raises(ValueError, match="Missing required column"):
        read_experiments(path)


def test_write_json_creates_parents(tmp_path):
    path = write_json({"x": 1}, tmp_path / "a" / "b.json", meta=False)
    assert read_json(path) == {"x": 1}
