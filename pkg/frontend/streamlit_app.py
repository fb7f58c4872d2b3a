# frontend/streamlit_app.py
import json
import os
from typing import Any, Dict, Optional

import pandas as pd
import requests
import streamlit as st

# -------------------- Config --------------------
DEFAULT_BACKEND_URL = os.getenv("BACKEND_URL", "http://127.0.0.1:8000")
TIMEOUT = 600

st.set_page_config(page_title="Spider Certificates", layout="wide")

st.markdown(
    """
<style>
.result-meta { color:#666; font-size:0.85rem; }
</style>
""",
    unsafe_allow_html=True,
)

# -------------------- Header --------------------
st.title("Spider certificates")
st.caption("Sherali-Adams upper bounds for max-cut and 2-XOR, with explicit feasible points for comparison.")

with st.sidebar:
    st.header("Settings")
    backend_url = st.text_input("API URL", value=DEFAULT_BACKEND_URL, help="FastAPI backend base URL")
    try:
        h = requests.get(f"{backend_url}/health", timeout=5)
        st.caption(f"Backend {h.json().get('version', '?')}" if h.ok else f"Backend error {h.status_code}")
    except Exception:
        st.caption("Backend unreachable")
    st.divider()
    st.header("Graph")
    source = st.radio("Source", options=["Upload JSON", "Complete graph", "Cycle"], index=1)
    graph: Optional[Dict[str, Any]] = None
    if source == "Upload JSON":
        up = st.file_uploader("Graph JSON", type=["json"], help='{"n": int, "edges": [[u, v, mult, sign], ...]}')
        if up:
            try:
                graph = json.loads(up.getvalue().decode("utf-8"))
            except Exception as e:
                st.error(f"Could not read graph: {e}")
    else:
        n = st.number_input("Vertices", min_value=3, max_value=512, value=16, step=1)
        n = int(n)
        if source == "Complete graph":
            edges = [[u, v, 1, -1] for u in range(n) for v in range(u + 1, n)]
        else:
            edges = [[u, (u + 1) % n, 1, -1] for u in range(n)]
        graph = {"n": n, "edges": edges}


def post(path: str, payload: Dict[str, Any]) -> Optional[Dict[str, Any]]:
    try:
        r = requests.post(f"{backend_url}{path}", json=payload, timeout=TIMEOUT)
    except Exception as e:
        st.error(f"Request failed: {e}")
        return None
    if not r.ok:
        st.error(f"API error: {r.status_code} {r.text}")
        return None
    return r.json()


tab_spider, tab_cert, tab_lb = st.tabs(["Spider check", "Certify", "Lower bound"])

# -------------------- Spider check --------------------
with tab_spider:
    c1, c2 = st.columns(2)
    k = int(c1.number_input("Legs k", min_value=2, value=9, step=1))
    ell = int(c2.number_input("Leg length l", min_value=1, value=2, step=1))
    if st.button("Check spider", type="primary"):
        rep = post("/spider-check", {"k": k, "ell": ell})
        if rep:
            m1, m2, m3 = st.columns(3)
            m1.metric("<Psi, A(0)>", f"{rep['inner'][0]:.6f}")
            m2.metric("min eigenvalue", f"{rep['min_eigenvalue']:.3g}")
            m3.metric("passed", "yes" if rep["passed"] else "no")
            st.dataframe(
                pd.DataFrame(
                    {"d": list(range(len(rep["inner"]))), "inner": rep["inner"], "formula": rep["formula"],
                     "residual": rep["residuals"]}
                ),
                use_container_width=True,
            )

# -------------------- Certify --------------------
with tab_cert:
    kind = st.selectbox("Problem", options=["maxcut", "2xor"], index=0)
    by_eps = st.toggle("Choose parameters from epsilon", value=True)
    body: Dict[str, Any] = {"kind": kind}
    if by_eps:
        body["epsilon"] = st.number_input("epsilon", min_value=0.001, max_value=0.999, value=0.5, step=0.01, format="%.3f")
    else:
        c1, c2 = st.columns(2)
        body["k"] = int(c1.number_input("k", min_value=2, value=3, step=1, key="cert_k"))
        body["ell"] = int(c2.number_input("l", min_value=1, value=1, step=1, key="cert_ell"))
    body["verify"] = st.selectbox("Verification", options=["none", "exhaustive", "sampled"], index=0)

    if graph is not None:
        with st.expander("Graph summary", expanded=False):
            files = {"file": ("graph.json", json.dumps(graph).encode("utf-8"), "application/json")}
            try:
                r = requests.post(f"{backend_url}/graph/summary", files=files, timeout=TIMEOUT)
                if r.ok:
                    st.json(r.json())
                else:
                    st.error(f"API error: {r.status_code} {r.text}")
            except Exception as e:
                st.error(f"Request failed: {e}")

    if st.button("Certify", type="primary", disabled=graph is None):
        with st.spinner("Certifying…"):
            cert = post("/certify", {"graph": graph, **body})
        if cert:
            m1, m2, m3, m4 = st.columns(4)
            m1.metric("bound", f"{cert['bound_obj']:.6f}")
            m2.metric("sharp bound", f"{cert['bound_obj_sharp']:.6f}")
            m3.metric("rho", f"{cert['rho']:.4g}")
            m4.metric("rounds R", cert["R"])
            if cert["vacuous"]:
                st.warning("The certificate is vacuous (beta >= 1).")
            ver = cert.get("verification")
            if ver:
                st.dataframe(pd.DataFrame(ver["checks"]), use_container_width=True)
            with st.expander("Certificate JSON"):
                st.json(cert)

# -------------------- Lower bound --------------------
with tab_lb:
    rounds = int(st.number_input("Rounds R", min_value=1, value=1, step=1))
    if st.button("Build feasible point", type="primary", disabled=graph is None):
        rep = post("/lowerbound", {"graph": graph, "rounds": rounds})
        if rep:
            m1, m2, m3 = st.columns(3)
            m1.metric("feasible value", f"{rep['value']:.6f}")
            m2.metric("guarantee", f"{rep['guaranteed']:.6f}")
            m3.metric("embeddability", rep["embeddability"]["dominance"])
            st.json(rep)
