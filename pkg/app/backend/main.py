import json
import logging

from fastapi import FastAPI, File, HTTPException, UploadFile
from fastapi.middleware.cors import CORSMiddleware

from app.spidercert import config
from app.spidercert.bench import eig_bounds
from app.spidercert.certifier import certify_2xor, certify_maxcut, verify_certificate
from app.spidercert.csp import CspInstance, instance_from_model, refute_xor, xor_from_graph
from app.spidercert.data_access import graph_from_dict
from app.spidercert.feaspoint import lower_bound
from app.spidercert.graph import SignedGraph, operator_radius, walk_operator
from app.spidercert.schemas import (
    CertificateModel,
    CertifyRequest,
    GraphSummary,
    LowerBoundReport,
    LowerBoundRequest,
    PsiReport,
    RefutationReport,
    RefuteXorRequest,
    SpiderCheckRequest,
)
from app.spidercert.spider import build_psi, build_spider, verify_psi

logging.basicConfig(level=config.LOG_LEVEL)
logger = logging.getLogger(__name__)

app = FastAPI(title="Spider Certificate API", version=config.VERSION)

app.add_middleware(
    CORSMiddleware,
    allow_origins=["*"],
    allow_credentials=True,
    allow_methods=["*"],
    allow_headers=["*"],
)


def _bad_request(err: Exception) -> HTTPException:
    logger.info("rejected request: %s", err)
    return HTTPException(400, str(err))


@app.get("/health")
def health():
    return {"status": "ok", "version": config.VERSION}


@app.post("/spider-check", response_model=PsiReport)
def spider_check(req: SpiderCheckRequest):
    try:
        return verify_psi(build_psi(build_spider(req.k, req.ell), alpha=req.alpha))
    except ValueError as err:
        raise _bad_request(err)


@app.post("/graph/summary", response_model=GraphSummary)
async def graph_summary(file: UploadFile = File(...)):
    """Upload graph JSON: {"n": int, "edges": [[u, v, mult, sign], ...]}"""
    if not file.filename.lower().endswith(".json"):
        raise HTTPException(400, "Please upload a JSON file")
    content = (await file.read()).decode("utf-8", errors="replace")
    try:
        G = graph_from_dict(json.loads(content), file.filename)
    except (ValueError, KeyError) as err:
        raise _bad_request(err)
    walk = walk_operator(G)
    return GraphSummary(
        n=G.n,
        edges=G.num_edges,
        pi_star=G.pi_star,
        d_min=G.d_min,
        rho_signed=operator_radius(walk, "signed"),
        rho_centered=operator_radius(walk, "centered"),
        eig=eig_bounds(G),
    )


@app.post("/certify", response_model=CertificateModel)
def certify(req: CertifyRequest):
    try:
        G = SignedGraph.from_model(req.graph)
        fn = certify_maxcut if req.kind == "maxcut" else certify_2xor
        if req.epsilon is not None:
            cert = fn(G, epsilon=req.epsilon)
        elif req.k is not None and req.ell is not None:
            cert = fn(G, k=req.k, ell=req.ell, require_corollary=False)
        else:
            raise ValueError("Give epsilon or both k and ell")
        report = None
        if req.verify != "none":
            report = verify_certificate(cert, G, mode=req.verify, samples=req.samples, seed=req.seed)
    except ValueError as err:
        raise _bad_request(err)
    return cert.to_model(report)


@app.post("/lowerbound", response_model=LowerBoundReport)
def lowerbound(req: LowerBoundRequest):
    try:
        G = SignedGraph.from_model(req.graph)
        return lower_bound(xor_from_graph(G, unit=True), req.rounds, subset_size=req.subset_size)
    except ValueError as err:
        raise _bad_request(err)


@app.post("/refute-xor", response_model=RefutationReport)
def refute(req: RefuteXorRequest):
    try:
        I = instance_from_model(req.instance)
        if isinstance(I, CspInstance):
            raise ValueError("refute-xor takes XOR terms, not CSP clauses")
        return refute_xor(I, epsilon=req.epsilon, k=req.k, ell=req.ell, seed=req.seed)
    except ValueError as err:
        raise _bad_request(err)
