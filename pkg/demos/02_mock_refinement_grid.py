"""Run a translation-refinement grid offline with the deterministic mock.

The mock backend echoes a transformed slice of each prompt, so the whole
pipeline (unit planning, prompt rendering, merging, provenance, run
directories) is exercisable without any model, and two executions of the
same config produce byte-identical artifacts.

    python demos/02_mock_refinement_grid.py
"""

import tempfile
from pathlib import Path

from refinelab.experiment import run_experiment, runs_identical

CORPUS = Path(__file__).parent.parent / "tests" / "fixtures" / "fixture_corpus.jsonl"


def main() -> None:
    config = {
        "corpus": {"path": str(CORPUS)},
        "grid": {
            "g_mt": ["doc_chunk"],
            "g_refine": ["segment", "paragraph", "doc_chunk"],
            "strategies": ["general", "monolingual"],
        },
        "steps": 2,
        # Translator and refiner may differ (strength-swap experiments).
        "translator": {"kind": "mock", "seed": 1, "backend_id": "mock-translator"},
        "refiner": {"kind": "mock", "seed": 2, "backend_id": "mock-refiner"},
        "max_output_tokens": 160,
    }

    with tempfile.TemporaryDirectory() as tmp:
        root_a = Path(tmp) / "run_a"
        experiment = run_experiment(config, root_a)
        print(f"cells executed: {len(experiment.manifest.cells)}")
        for cell in experiment.manifest.cells:
            print(f"  {cell['cell_id']:<40} {cell['status']}")

        run = experiment.runs["doc_chunk__segment__general"]
        doc_run = run.doc_runs["alpha"]
        print(f"\nalpha steps: {[s.index for s in doc_run.steps]}")
        print("s0 preview:", doc_run.steps[0].merged_text[:100].replace("\n", " | "))
        print("s2 preview:", doc_run.steps[2].merged_text[:100].replace("\n", " | "))

        root_b = Path(tmp) / "run_b"
        run_experiment(config, root_b)
        print("\nbyte-identical rerun (timestamps excluded):",
              runs_identical(root_a, root_b))

        cell_dir = root_a / "doc_chunk__segment__general" / "docs" / "alpha"
        print("\nper-step artifacts for alpha:")
        for path in sorted(cell_dir.glob("s*.merged.txt")):
            print("  ", path.name, f"({path.stat().st_size} bytes)")


if __name__ == "__main__":
    main()
