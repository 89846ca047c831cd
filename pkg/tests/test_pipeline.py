import json
import shutil

import pytest
from conftest import fixture_config, run_fixture
from fixture_oracle import CORPUS
from stubs import outline_client

from paperdiag.errors import ConfigError, MissingCheckpoint
from paperdiag.pipeline import Pipeline, PipelineConfig

BAD_TABLE = ("\\documentclass{article}\n\\begin{document}\nWe report numbers in Table~\\ref{tab:bad}.\n\n"
             "\\begin{table}\n\\caption{Broken.}\\label{tab:bad}\n\\begin{tabular}{l}\n\\nosuchmacro x \\\\\n"
             "\\end{tabular}\n\\end{table}\n\\end{document}\n")


def test_rerun_changes_nothing(fixture_build, tmp_path):
    out = tmp_path / "b"
    shutil.copytree(fixture_build.out_dir, out)
    _, status, summaries, _ = run_fixture(out)
    assert status == 0
    for s in summaries:
        if s.stage not in ("assemble", "stats"):
            assert s.changed == 0 and s.failed == 0, s.line()
    assert load(out) == load(fixture_build.out_dir)


def load(out):
    return {p.relative_to(out).as_posix(): p.read_bytes() for p in sorted((out / "dataset").rglob("*.jsonl"))}


def test_dataset_images_and_run_records(fixture_build):
    out = fixture_build.out_dir
    used = {d.value for s in fixture_build.samples for d in s.diagrams if d.kind != "table_latex"}
    assert used and all((out / "dataset" / rel).is_file() for rel in used)
    assert any(rel.startswith("images/tables/") for rel in used)
    assert any(rel.startswith("images/figures/") for rel in used)
    resolved = json.loads((out / "resolved_config.json").read_text())
    assert resolved["seed"] == 0 and resolved["flags"]["outline_free_variants"] is True
    events = [json.loads(line) for line in (out / "events.jsonl").read_text().splitlines()]
    assert {"ts", "stage", "paper_id", "event", "code", "message"} <= set(events[0])
    assert any(e["event"] == "summary" and e["stage"] == "stats" for e in events)
    splits = json.loads((out / "dataset/splits.json").read_text())
    assert set(splits.values()) == {"train", "val", "test"}
    assert (out / "stats.json").is_file() and "captioning" in (out / "stats.txt").read_text()


def test_stage_without_prerequisites_is_fatal(tmp_path):
    pipeline = Pipeline(fixture_config(tmp_path), llm_client=outline_client())
    with pytest.raises(MissingCheckpoint):
        pipeline.stage_assemble()
    status, summaries = pipeline.run(["align"])
    assert status == 1 and summaries[0].fatal.startswith("E_")
    with pytest.raises(ConfigError):
        pipeline.run(["render"])


def test_config_validation_and_loading(tmp_path):
    with pytest.raises(ConfigError):
        PipelineConfig(split_ratios=(0.5, 0.2, 0.2)).validate()
    with pytest.raises(ConfigError):
        PipelineConfig.from_dict({"seeds": 1})
    with pytest.raises(ConfigError):
        PipelineConfig.from_dict({"render": {"colour": 1}})
    path = tmp_path / "cfg.yaml"
    path.write_text("seed: 3\nsplit_ratios: [0.8, 0.1, 0.1]\nrender:\n  dpi: 100\n")
    cfg = PipelineConfig.load(path, {"seed": 9, "render.latex_cmd": "builtin", "workers": None})
    assert (cfg.seed, cfg.split_ratios, cfg.render.dpi, cfg.render.latex_cmd) == (9, (0.8, 0.1, 0.1), 100, "builtin")
    assert PipelineConfig.load(None, {"split_ratios": "0.9,0.05,0.05"}).split_ratios == (0.9, 0.05, 0.05)
    path.write_text("- a list\n")
    with pytest.raises(ConfigError):
        PipelineConfig.load(path)


def test_compile_failure_is_checkpointed(tmp_path):
    corpus = tmp_path / "corpus"
    shutil.copytree(CORPUS, corpus)
    (corpus / "2301.00009").mkdir()
    (corpus / "2301.00009/main.tex").write_text(BAD_TABLE)
    cfg = PipelineConfig(corpus_dir=str(corpus), out_dir=str(tmp_path / "out"))
    cfg.render.latex_cmd = "builtin"
    pipeline = Pipeline(cfg, llm_client=outline_client())
    status, summaries = pipeline.run(["parse", "render-tables"])
    assert status == 0 and summaries[1].failed == 1
    rec = pipeline.ckpt.load("render-tables", next(s.paper_id for s in pipeline.sources
                                                    if s.paper_id.arxiv_id == "2301.00009"))
    assert "Undefined control sequence" in rec["data"]["error"]
    events = [json.loads(line) for line in (tmp_path / "out/events.jsonl").read_text().splitlines()]
    assert any(e["event"] == "failed" and e["code"] == "E_COMPILE_FAILED" for e in events)
    _, again = Pipeline(cfg, llm_client=outline_client()).run(["render-tables"])
    assert again[0].failed == 0 and again[0].changed == 0


def test_edited_paper_only_reparses_itself(tmp_path):
    corpus = tmp_path / "corpus"
    shutil.copytree(CORPUS, corpus)
    cfg = PipelineConfig(corpus_dir=str(corpus), out_dir=str(tmp_path / "out"))
    Pipeline(cfg).run(["parse"])
    main = corpus / "2301.00003/src/main.tex"
    main.write_text(main.read_text().replace("\\end{document}", "An extra closing paragraph.\n\\end{document}"))
    _, (s,) = Pipeline(cfg).run(["parse"])
    assert (s.changed, s.unchanged) == (1, 5)
