"""Rebuild the frozen replay cache for the fixture exam.

Runs the real pipeline for every configuration against the scripted stub
model (no network) and records each request/response pair in
``replay_cache/``. Run from anywhere:

    python3 tests/fixtures/build_replay_cache.py
"""

from __future__ import annotations

import shutil
import sys
import tempfile
from dataclasses import replace
from pathlib import Path

HERE = Path(__file__).resolve().parent
sys.path.insert(0, str(HERE))

import stub_model  # noqa: E402

from mathinterp.config import load_config, load_exam  # noqa: E402
from mathinterp.gateway import LLMClient, ReplayCache  # noqa: E402
from mathinterp.modes import Configuration  # noqa: E402
from mathinterp.pipeline import run_exam  # noqa: E402


def main() -> int:
    config = load_config(HERE / "run_config.yaml")
    cache_dir = HERE / "replay_cache"
    if cache_dir.exists():
        shutil.rmtree(cache_dir)
    config = replace(config, cache_dir=cache_dir, replay_only=False)
    client = LLMClient(config.endpoint, ReplayCache(cache_dir), transport=stub_model.transport())
    exam = load_exam(HERE / "exam_calc3.md")
    with tempfile.TemporaryDirectory() as tmp:
        for mode in Configuration:
            run = run_exam(exam, mode, config, Path(tmp) / mode.value, timestamp="20250101_000000", client=client)
            print(f"{mode.value}: {len(run.results)} ok, {len(run.failures)} failed")
            for failure in run.failures:
                print(f"  {failure}")
    client.close()
    print(f"{len(ReplayCache(cache_dir))} cached responses in {cache_dir}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
