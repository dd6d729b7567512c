"""Regenerates eba_synthetic_87.csv: 87 synthetic banks at EBA scale (millions)."""
import csv
import random

rng = random.Random(2011)
rows = []
for k in range(87):
    assets = 10 ** rng.uniform(2.0, 6.0)
    capital = assets * rng.uniform(0.03, 0.08)
    interbank = assets * rng.uniform(0.05, 0.25)
    rows.append([f"SYN{k + 1:03d}", assets, capital, interbank])

# keep every bank's interbank book below 30% of everyone else's combined
for _ in range(50):
    total = sum(r[3] for r in rows)
    for r in rows:
        r[3] = min(r[3], 0.3 * (total - r[3]))

with open("eba_synthetic_87.csv", "w", newline="") as f:
    w = csv.writer(f, lineterminator="\n")
    w.writerow(["bank_id", "total_assets", "capital", "interbank_liabilities"])
    for bank_id, a, c, ib in rows:
        w.writerow([bank_id, f"{a:.3f}", f"{c:.3f}", f"{ib:.3f}"])
