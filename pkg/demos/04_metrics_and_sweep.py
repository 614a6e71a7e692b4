"""Metric suite and similarity-threshold sweep.

The sweep here reuses the hotel pipeline from demo 03 and probes three
threshold settings: 0 (retrieval always fires), 0.6 (fires on good matches),
and 1.0 (never fires).
"""

import importlib.util
import json
import os

from instrec import EvalSample, compute_metrics, delta_sweep, sweep_to_csv

# --- metrics on a hand-checkable toy set ---------------------------------------

golds = ["A", "A", "B"]
predictions = [["A", "B"], ["B", "A"], ["B", "C"]]
report = compute_metrics(predictions, golds, k_values=(1, 2))
print("toy metrics:", json.dumps(report.to_dict(), indent=2))
print()

# --- threshold sweep over the demo pipeline ------------------------------------

spec = importlib.util.spec_from_file_location(
    "recommendation_flow",
    os.path.join(os.path.dirname(__file__), "03_recommendation_flow.py"),
)
flow = importlib.util.module_from_spec(spec)
spec.loader.exec_module(flow)  # prints the demo 03 output as a side effect
print()

testset = [EvalSample(trigger=flow.trigger, gold="add-calendar-event")]
rows = delta_sweep(flow.pipeline, testset, deltas=[0.0, 0.6, 1.0], k=3)
print(sweep_to_csv(rows))
for row in rows:
    hit = row.metrics.hit_rate[1]
    print(f"delta={row.delta}: hit rate @1 = {hit}")
