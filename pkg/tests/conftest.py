import json
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

TINY_MANIFEST = {
    "name": "tiny",
    "env": "pendulum",
    "context_dims": ["gravity"],
    "policies": ["oracle", "agnostic", "pl_lstm"],
    "seeds": [0],
    "total_steps": 150,
    "warmup_steps": 80,
    "set_sizes": {"train": 2, "validation": 2, "test": 2},
    "checkpoint_count": 2,
    "checkpoint_window": 0.5,
    "episodes_per_context": {"validation": 2, "test": 2},
    "env_kwargs": {"max_steps": 50},
}


@pytest.fixture(scope="session")
def tiny_experiment(tmp_path_factory):
    """One fully trained, selected, and tested experiment, shared read-only."""
    from ctxrl.cli import main

    root = tmp_path_factory.mktemp("tiny_runs")
    manifest_path = root / "tiny.json"
    manifest_path.write_text(json.dumps(TINY_MANIFEST))
    rc = main(["--runs-root", str(root), "all", str(manifest_path)])
    assert rc == 0
    return {
        "root": root,
        "manifest_path": manifest_path,
        "exp_dir": root / "tiny",
        "manifest": TINY_MANIFEST,
    }
