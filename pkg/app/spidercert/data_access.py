import json
import logging
import sys
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Union

import numpy as np
import pandas as pd
from pydantic import BaseModel, ValidationError

from . import config
from .csp import CspInstance, XorInstance, instance_from_model
from .graph import SignedGraph
from .schemas import CertificateModel, Experiment, GraphModel, InstanceModel
from .spider import SpiderMatrix, spider_dump

logger = logging.getLogger(__name__)

REQUIRED_COLS = ["name", "generator", "n", "seed", "kind"]
CSV_COLUMNS = REQUIRED_COLS + [
    "degree",
    "vertices",
    "edges",
    "rho",
    "pi_star",
    "d_min",
    "laplacian_bound",
    "walk_bound",
    "signed_bound",
    "k",
    "ell",
    "R",
    "beta_closed",
    "beta_sharp",
    "cert_bound",
    "cert_bound_sharp",
    "optimum",
    "optimum_exact",
    "feasible_value",
    "violations",
    "errors",
    "time_total",
]


def to_jsonable(obj: Any) -> Any:
    if isinstance(obj, BaseModel):
        return obj.model_dump(mode="json")
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(o) for o in obj]
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


def dumps(payload: Any, meta: bool = True, argv: Optional[Sequence[str]] = None) -> str:
    """Deterministic JSON: sorted keys; the metadata block is the only run-dependent part."""
    body = to_jsonable(payload)
    if meta:
        body = {
            "result": body,
            "meta": {
                "version": config.VERSION,
                "created": datetime.now(timezone.utc).isoformat(timespec="seconds"),
                "argv": list(sys.argv[1:] if argv is None else argv),
            },
        }
    return json.dumps(body, sort_keys=True, indent=2) + "\n"


def write_json(payload: Any, path: Union[str, Path], meta: bool = True, argv: Optional[Sequence[str]] = None) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps(payload, meta=meta, argv=argv))
    return path


def read_json(path: Union[str, Path]) -> Dict[str, Any]:
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as err:
        raise ValueError(f"{path}: not valid JSON ({err})") from err
    # files written with a metadata block carry the payload under "result"
    if isinstance(data, dict) and "result" in data and "meta" in data:
        data = data["result"]
    if not isinstance(data, dict):
        raise ValueError(f"{path}: expected a JSON object")
    return data


def _validate(model: type, data: Dict[str, Any], path: Union[str, Path]):
    try:
        return model.model_validate(data)
    except ValidationError as err:
        raise ValueError(f"{path}: {err}") from err


def graph_from_dict(data: Dict[str, Any], source: str = "<graph>") -> SignedGraph:
    """Graph JSON, or a generator spec {"generator": "complete" | "gnp" | "regular", ...}."""
    if "generator" in data:
        from .bench import gen_complete, gen_gnp, gen_regular

        kind = data["generator"]
        n = int(data["n"])
        seed = int(data.get("seed", 0))
        if kind == "complete":
            return gen_complete(n)
        if kind == "gnp":
            return gen_gnp(n, float(data["degree"]), seed=seed)
        if kind == "regular":
            return gen_regular(n, int(data["degree"]), seed=seed, simple=bool(data.get("simple", False)))
        raise ValueError(f"{source}: unknown generator '{kind}'")
    return SignedGraph.from_model(_validate(GraphModel, data, source))


def load_graph(path: Union[str, Path]) -> SignedGraph:
    return graph_from_dict(read_json(path), str(path))


def save_graph(G: SignedGraph, path: Union[str, Path], meta: bool = False) -> Path:
    return write_json(G.to_model(), path, meta=meta)


def load_instance(path: Union[str, Path]) -> Union[XorInstance, CspInstance]:
    return instance_from_model(_validate(InstanceModel, read_json(path), path))


def save_instance(I: Union[XorInstance, CspInstance], path: Union[str, Path], meta: bool = False) -> Path:
    return write_json(I.to_model(), path, meta=meta)


def load_certificate(path: Union[str, Path]) -> CertificateModel:
    return _validate(CertificateModel, read_json(path), path)


def save_certificate(cert: CertificateModel, path: Union[str, Path], meta: bool = True) -> Path:
    return write_json(cert, path, meta=meta)


def dump_spider(sm: SpiderMatrix, path: Union[str, Path], with_matrix: bool = True) -> List[Path]:
    """Inner-product table as JSON; the dense Psi next to it as .npy when it exists."""
    path = Path(path)
    written = [write_json(spider_dump(sm), path.with_suffix(".json"), meta=False)]
    if with_matrix and sm.Psi is not None:
        npy = path.with_suffix(".npy")
        np.save(npy, sm.Psi)
        written.append(npy)
    logger.info("spider dump written to %s", ", ".join(str(p) for p in written))
    return written


def experiments_frame(rows: Sequence[Experiment]) -> pd.DataFrame:
    records = []
    for row in rows:
        rec = row.model_dump()
        rec["errors"] = "; ".join(f"{k}: {v}" for k, v in sorted(row.errors.items()))
        rec["time_total"] = sum(row.timings.values())
        records.append({c: rec.get(c) for c in CSV_COLUMNS})
    return pd.DataFrame(records, columns=CSV_COLUMNS)


def write_experiments(rows: Sequence[Experiment], path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    experiments_frame(rows).to_csv(path, index=False)
    return path


def read_experiments(path: Union[str, Path]) -> List[Experiment]:
    df = pd.read_csv(path, skipinitialspace=True)
    for col in REQUIRED_COLS:
        if col not in df.columns:
            raise ValueError(f"Missing required column: {col}")
    for col in CSV_COLUMNS:
        if col not in df.columns:
            df[col] = None
    df = df.astype(object).where(df.notna(), None)
    out = []
    for rec in df[CSV_COLUMNS].to_dict(orient="records"):
        errors = rec.pop("errors") or ""
        total = rec.pop("time_total")
        rec["errors"] = dict(part.split(": ", 1) for part in str(errors).split("; ") if ": " in part)
        rec["timings"] = {} if total is None else {"total": float(total)}
        if rec.get("optimum_exact") is not None:
            rec["optimum_exact"] = str(rec["optimum_exact"])
        out.append(Experiment.model_validate(rec))
    return out
