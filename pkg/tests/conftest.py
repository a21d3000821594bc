import os
from pathlib import Path

import numpy as np
import pytest

from mfsir.dataset import MultiLabelDataset

ROOT = Path(__file__).resolve().parents[1]

# PASS/FAIL lines from the acceptance suite, echoed in the terminal summary
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)


def data_dir() -> Path:
    return Path(os.environ.get("MFSIR_DATA_DIR", ROOT / "data"))


def mulan_paths(name: str):
    """(arff, xml) for a MULAN dataset under $MFSIR_DATA_DIR (default ./data), or None."""
    base = data_dir()
    arff, xml = base / f"{name}.arff", base / f"{name}.xml"
    if arff.is_file() and xml.is_file():
        return arff, xml
    return None


def require_mulan(name: str):
    paths = mulan_paths(name)
    if paths is None:
        pytest.skip(f"{name}.arff/{name}.xml not found in {data_dir()}")
    return paths


def write_mulan(tmp_path, arff_text: str, labels, name="tiny"):
    arff = tmp_path / f"{name}.arff"
    xml = tmp_path / f"{name}.xml"
    arff.write_text(arff_text)
    xml.write_text('<?xml version="1.0" encoding="utf-8"?>\n'
                   '<labels xmlns="http://mulan.sourceforge.net/labels">\n'
                   + "".join(f'  <label name="{lbl}"></label>\n' for lbl in labels)
                   + "</labels>\n")
    return arff, xml


def synthetic_dataset(n=120, m=20, q=4, informative=4, seed=0, name="synthetic"):
    """Labels are noisy linear thresholds of the first ``informative`` features."""
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, m))
    W = rng.choice([-1.0, 1.0], size=(informative, q)) * rng.uniform(0.5, 1.5, (informative, q))
    Y = (X[:, :informative] @ W + 0.1 * rng.standard_normal((n, q)) > 0).astype(int)
    return MultiLabelDataset(X, Y, tuple(f"f{j}" for j in range(m)),
                             tuple(f"l{j}" for j in range(q)), name)


def write_dataset(d: MultiLabelDataset, directory: Path):
    """Serialize a dataset as MULAN ARFF + XML."""
    lines = [f"@relation {d.name}"]
    lines += [f"@attribute {f} numeric" for f in d.feature_names]
    lines += [f"@attribute {lbl} {{0,1}}" for lbl in d.label_names]
    lines.append("@data")
    for x, y in zip(d.X, d.Y):
        lines.append(",".join([repr(float(v)) for v in x] + [str(int(v)) for v in y]))
    return write_mulan(directory, "\n".join(lines) + "\n", d.label_names, d.name)


@pytest.fixture
def tiny_synthetic():
    return synthetic_dataset()
