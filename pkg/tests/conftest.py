import sys
import time
from pathlib import Path

import pytest

TESTS = Path(__file__).parent
sys.path.insert(0, str(TESTS))

from fixture_oracle import CORPUS  # noqa: E402
from stubs import outline_client  # noqa: E402

from paperdiag.assemble import load_samples  # noqa: E402
from paperdiag.pipeline import STAGES, Pipeline, PipelineConfig  # noqa: E402

# criterion number -> (passed, detail), filled by test_acceptance
ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def fixture_config(out_dir, seed=0, **flags) -> PipelineConfig:
    cfg = PipelineConfig(corpus_dir=str(CORPUS), out_dir=str(out_dir), seed=seed, workers=2)
    cfg.flags.outline_free_variants = flags.get("outline_free_variants", True)
    return cfg


def run_fixture(out_dir, seed=0, stages=STAGES, **flags):
    client = outline_client()
    pipeline = Pipeline(fixture_config(out_dir, seed, **flags), llm_client=client)
    t0 = time.perf_counter()
    status, summaries = pipeline.run(list(stages))
    elapsed = time.perf_counter() - t0
    return pipeline, status, summaries, elapsed


class Build:
    def __init__(self, out_dir: Path):
        self.out_dir = out_dir
        self.pipeline, self.status, self.summaries, self.elapsed = run_fixture(out_dir)
        self.samples = load_samples(out_dir / "dataset")

    def model(self, pid):
        return self.pipeline._model(next(s.paper_id for s in self.pipeline.sources if s.paper_id.arxiv_id == pid))


@pytest.fixture(scope="session")
def fixture_build(tmp_path_factory) -> Build:
    return Build(tmp_path_factory.mktemp("fixture-build"))


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n}: {'PASS' if ok else 'FAIL'} - {detail}")
