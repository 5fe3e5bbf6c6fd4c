"""
Driving the HTTP API
====================

The exploration client talks to a small HTTP facade; everything the UI shows
comes from these endpoints, so scripts can reproduce any number on screen.
This demo runs the app in-process (no port needed); `econoforge serve
--data-dir ...` exposes the same thing over the network.
"""

import tempfile
import time
from pathlib import Path

from fastapi.testclient import TestClient

from econoforge.api import create_app
from econoforge.store import save_dataset
from econoforge.synthetic import SyntheticSpec, generate_synthetic

root = Path(tempfile.mkdtemp(prefix="econoforge-demo-"))
ds = generate_synthetic(SyntheticSpec(n_firms=80, n_sectors=4, n_regions=3,
                                      years=(2013, 2014), seed=2))
save_dataset(ds, root)

app = create_app(root)
client = TestClient(app)

print("datasets:", [d["dataset_id"] for d in client.get("/datasets").json()["datasets"]])

layer = client.get(f"/datasets/{ds.dataset_id}/bins",
                   params={"year": 2014, "resolution": 6, "metric": "cash_flow"}).json()
print(f"bins at resolution 6: {len(layer['bins'])}, total {layer['total_value']} cents, "
      f"version {layer['version']}")

delta = client.get(f"/datasets/{ds.dataset_id}/bins",
                   params={"year": 2014, "resolution": 6, "metric": "cash_flow",
                           "mode": "delta"}).json()
print(f"delta layer vs {delta['previous_year']}: {len(delta['bins'])} bins")

# Submit rules to the solver; the job is polled, the model lands in the menu.
rules = "\n".join(line for line in (
    f"sector_total {src} -> {dst} = {amount} tol 0"
    for (src, dst), amount in sorted(ds.io_tables[2014].entries.items())
))
job = client.post("/models/solve", json={"dataset_id": ds.dataset_id, "year": 2014,
                                         "rules": rules}).json()
while True:
    status = client.get(f"/jobs/{job['job_id']}").json()
    if status["status"] in ("done", "failed", "infeasible", "cancelled"):
        break
    time.sleep(0.05)
print(f"job {job['job_id']}: {status['status']}, model {status['result_model_id']}")

model_id = status["result_model_id"]
models = client.get("/models").json()["models"]
print("registered models:", [m["model_id"] for m in models])

some_bin = layer["bins"][0]
flows = client.get(f"/models/{model_id}/flows",
                   params={"bin": f"{some_bin['q']}:{some_bin['r']}",
                           "resolution": 6}).json()
print(f"flows for bin ({some_bin['q']},{some_bin['r']}): {len(flows['arcs'])} arcs, "
      f"stats {flows['stats']}")

doc = client.get(f"/models/{model_id}/export/smtlib").text
print(f"SMT-LIB export: {len(doc.splitlines())} lines, starts with {doc.splitlines()[0]!r}")
