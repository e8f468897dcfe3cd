import json
import subprocess
import sys
from pathlib import Path

import pytest


def run_airwayseg(*argv) -> None:
    """Drive the segmentation pipeline CLI (the trainer's upstream interface)."""
    result = subprocess.run(
        [sys.executable, "-m", "airwayseg.cli", *map(str, argv)],
        capture_output=True,
        text=True,
    )
    assert result.returncode == 0, result.stderr


@pytest.fixture(scope="session")
def weak_label_dataset(tmp_path_factory) -> Path:
    """8 synthetic RGB frames paired with pipeline-generated masks.

    Built through the pipeline's public surfaces only: `synth` renders the
    frames, `segment` produces the weak labels, and the training manifest
    pairs them under the standard id/rgb/gt schema.
    """
    root = tmp_path_factory.mktemp("weakdata")
    run_airwayseg("synth", "--out", root / "scenes", "--scenes", 8,
                  "--orifices", 2, "--resolution", 96, "--seed", 3)
    run_airwayseg("segment", "--manifest", root / "scenes" / "manifest.jsonl",
                  "--out", root / "labels")
    lines = []
    for i in range(8):
        sid = f"scene{i:04d}"
        lines.append(json.dumps({
            "id": sid,
            "rgb": f"scenes/{sid}.rgb.png",
            "gt": f"labels/{sid}.mask.png",
        }))
    manifest = root / "train.jsonl"
    manifest.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return manifest
