import json
import os

import pytest

from embedding_forge.audit import AuditLogger
from embedding_forge.model_io import load_model, load_sidecar, sidecar_path
from embedding_forge.recipes import Expectation, RecipeLoader
from embedding_forge.runner import ExperimentRunner, train_to_path
from embedding_forge.trainer import TrainConfig

RECIPE = """---
name: twins
description: Two arms with the same configuration.
base:
  model: cbow
  dim: 8
  window: 2
  epochs: 1
  workers: 1
arms:
  - {name: left}
  - {name: right, baseline: left}
expect:
  - right >= left
soft_expect:
  - right > left
seeds: [1, 2]
max_overhead: 100
---
"""


@pytest.fixture
def recipe(tmp_path):
    folder = tmp_path / "recipes" / "twins"
    folder.mkdir(parents=True)
    (folder / "RECIPE.md").write_text(RECIPE, encoding="utf-8")
    return RecipeLoader(str(tmp_path / "recipes")).get("twins")


@pytest.fixture
def topic_questions(tmp_path):
    path = tmp_path / "topic_questions.txt"
    path.write_text(
        ": family\n"
        "king queen prince princess\n"
        "cat dog horse cow\n"
        ": gram1-adjective-to-adverb\n"
        "runs walks jumps swims\n",
        encoding="utf-8",
    )
    return path


def test_train_to_path_writes_model_and_sidecar(artifacts, tmp_path):
    config = TrainConfig(model="cbow", dim=8, window=4, window_strategy="edws", epochs=2, edws_phases=2)
    path = tmp_path / "nested" / "model.bin"
    trained = train_to_path(artifacts, config, str(path))
    loaded = load_model(path)
    assert loaded.words == list(artifacts.vocabulary.words)
    assert loaded.vectors.tobytes() == trained.to_model_file().vectors.tobytes()
    sidecar = load_sidecar(sidecar_path(path))
    assert sidecar["window"]["per_epoch"] == [2, 4]


class TestExperimentRunner:
    @pytest.fixture
    def result(self, recipe, corpus_lines, topic_questions, tmp_path):
        runner = ExperimentRunner(audit=AuditLogger(str(tmp_path / "audit.log")), min_keep_count=1)
        return runner.run(recipe, corpus_lines, str(topic_questions), str(tmp_path / "runs"))

    def test_every_arm_and_seed_is_trained_and_saved(self, result, tmp_path):
        assert [(r.arm, r.seed) for r in result.arms] == [("left", 1), ("right", 1), ("left", 2), ("right", 2)]
        for arm in result.arms:
            assert os.path.exists(arm.model_path)
            assert os.path.exists(sidecar_path(arm.model_path))
            assert arm.report.total.total == 3
        assert os.path.basename(result.arms[1].model_path) == "right_seed1.bin"

    def test_identical_arms_pass_weak_and_fail_strict(self, result):
        for seed in (1, 2):
            assert result.correct("left", seed) == result.correct("right", seed)
        hard, soft = result.outcomes
        assert hard.passed and hard.passing_seeds == [1, 2]
        assert not soft.passed and soft.failing_seeds == [1, 2]
        # a failing soft expectation does not fail the recipe
        assert result.passed

    def test_overhead_is_reported_against_the_baseline(self, result):
        assert set(result.overhead) == {"right"}
        assert result.overhead["right"] > 0

    def test_result_serializes(self, result):
        data = json.loads(json.dumps(result.to_dict()))
        assert data["recipe"] == "twins"
        assert data["passed"] is True
        assert len(data["arms"]) == 4
        assert [e["soft"] for e in data["expectations"]] == [False, True]

    def test_recipe_run_is_audited(self, result, tmp_path):
        lines = (tmp_path / "audit.log").read_text().splitlines()
        assert any("RECIPE" in line and "SUCCESS" in line for line in lines)

    def test_missing_result_raises(self, result):
        with pytest.raises(KeyError):
            result.correct("left", 9)


def test_seed_override_and_strict_failure(recipe, corpus_lines, topic_questions, tmp_path):
    recipe.expectations = [Expectation("right", ">", "left")]
    runner = ExperimentRunner(min_keep_count=1, model_format="text")
    result = runner.run(recipe, corpus_lines, str(topic_questions), str(tmp_path / "runs"), seeds=[3])
    assert {r.seed for r in result.arms} == {3}
    assert result.arms[0].model_path.endswith("left_seed3.txt")
    assert not result.passed
