import numpy as np
import pandas as pd
import pytest

from mrpkit.model.spec import model_a
from mrpkit.synthetic import simulate_dataset


def pytest_runtest_logreport(report):
    """One visible pass/fail line per acceptance criterion."""
    if report.when == "call" and "test_acceptance" in report.nodeid:
        name = report.nodeid.split("::")[-1]
        status = "PASS" if report.passed else ("FAIL" if report.failed else "SKIP")
        print(f"\nACCEPTANCE {name}: {status}", flush=True)


@pytest.fixture(scope="session")
def fixture_a():
    """Model A fixture matching the canonical layout: 3 races, 6 ages, 10 zips, 20 weeks."""
    return simulate_dataset(model_a(), n_zips=10, n_weeks=20, mean_tests=15.0, seed=42)


def tiny_cells(n_zips=2, n_weeks=2, seed=1):
    """A handful of cells for exact hand computations."""
    rng = np.random.default_rng(seed)
    rows = []
    for z in [f"49{i:03d}" for i in range(n_zips)]:
        for w in range(n_weeks):
            n = int(rng.integers(1, 9))
            rows.append(
                {
                    "sex": "female" if rng.random() < 0.5 else "male",
                    "age_group": "[18,35)",
                    "race": "White",
                    "zip": z,
                    "week_index": w,
                    "n_tests": n,
                    "n_positive": int(rng.integers(0, n + 1)),
                }
            )
    return pd.DataFrame(rows)
