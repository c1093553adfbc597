import asyncio
import json
import os

import pytest

from embedding_forge.__main__ import build_server
from embedding_forge.audit import AuditLogger
from embedding_forge.config import Settings
from embedding_forge.model_io import save_model
from embedding_forge.recipes import RecipeLoader
from embedding_forge.resources import register_resources
from embedding_forge.runner import ExperimentRunner, train_to_path
from embedding_forge.tools import ModelCache, register_tools, resolve_lfw_params
from embedding_forge.trainer import TrainConfig


class RecordingServer:
    """Collects the functions registered through the FastMCP decorators."""

    def __init__(self):
        self.tools = {}
        self.resources = {}

    def tool(self, name=None):
        def decorator(fn):
            self.tools[name or fn.__name__] = fn
            return fn
        return decorator

    def resource(self, uri):
        def decorator(fn):
            self.resources[uri] = fn
            return fn
        return decorator


@pytest.fixture
def settings():
    return Settings.from_env()


@pytest.fixture
def server(settings, tmp_path):
    recorder = RecordingServer()
    audit = AuditLogger(str(tmp_path / "audit.log"))
    loader = RecipeLoader(settings.recipes_dir)
    register_tools(recorder, settings, audit, loader, ExperimentRunner(min_keep_count=1))
    register_resources(recorder, loader)
    return recorder


@pytest.fixture
def toy_path(toy_model, tmp_path):
    path = tmp_path / "toy.bin"
    save_model(toy_model, path, "bin")
    return str(path)


def test_every_tool_is_registered(server):
    assert set(server.tools) == {
        "build_vocabulary", "train_model", "evaluate_model", "most_similar", "solve_analogy",
        "weight_curve", "list_recipes", "run_recipe", "get_guide",
    }
    assert set(server.resources) == {"forge://recipes/{name}"}


def test_real_server_lists_the_tools(settings):
    tools = asyncio.run(build_server(settings).list_tools())
    assert "solve_analogy" in {tool.name for tool in tools}


def test_analogy_and_neighbours(server, toy_path):
    candidates = json.loads(server.tools["solve_analogy"](toy_path, "Man", "King", "Woman", topn=1))
    assert candidates[0][0] == "queen"
    neighbours = json.loads(server.tools["most_similar"](toy_path, "apple", topn=1))
    assert neighbours[0][0] == "pear"


def test_tool_errors_are_returned_as_text(server, toy_path, tmp_path):
    assert server.tools["solve_analogy"](toy_path, "man", "king", "unicorn").startswith("Error:")
    assert server.tools["evaluate_model"](str(tmp_path / "missing.bin")).startswith("Error:")
    assert server.tools["weight_curve"]().startswith("Error:")


def test_train_evaluate_and_vocabulary(server, corpus_file, tmp_path):
    vocabulary = json.loads(server.tools["build_vocabulary"](str(corpus_file), min_count=1))
    assert vocabulary["vocab_size"] == 30

    model_path = str(tmp_path / "m.bin")
    trained = json.loads(server.tools["train_model"](str(corpus_file), model_path, lfw="eq4", window=2,
                                                     epochs=1, dim=8, min_count=1))
    assert set(trained["lfw_params"]) == {"alpha0", "beta0", "alpha1", "beta1"}
    assert len(trained["history"]) == 1

    questions = tmp_path / "q.txt"
    questions.write_text(": family\nking queen prince princess\n", encoding="utf-8")
    report = json.loads(server.tools["evaluate_model"](model_path, str(questions)))
    assert report["total"]["total"] == 1

    curve = json.loads(server.tools["weight_curve"](model_path=model_path, window=2))
    assert curve["formula"] == "eq4"
    assert {p["side"] for p in curve["points"]} == {"left", "right"}


def test_recipes_are_listed_and_readable(server):
    names = [r["name"] for r in json.loads(server.tools["list_recipes"]())]
    assert names == ["edws", "lfw_formulas", "window_sweep"]
    assert server.resources["forge://recipes/{name}"]("edws").startswith("---")
    assert server.resources["forge://recipes/{name}"]("nope").startswith("Error")


def test_guide_is_served(server):
    assert "embedding" in server.tools["get_guide"]().lower()


class TestModelCache:
    def test_reuses_loaded_models_until_the_file_changes(self, toy_model, toy_path):
        cache = ModelCache()
        first = cache.get(toy_path)
        assert cache.get(toy_path) is first
        stat = os.stat(toy_path)
        save_model(toy_model, toy_path, "bin")
        os.utime(toy_path, (stat.st_atime, stat.st_mtime + 10))
        assert cache.get(toy_path) is not first

    def test_evicts_the_oldest_model(self, toy_model, tmp_path):
        cache = ModelCache(max_models=1)
        paths = []
        for name in ("a.bin", "b.bin"):
            save_model(toy_model, tmp_path / name, "bin")
            paths.append(str(tmp_path / name))
            cache.get(paths[-1])
        assert len(cache._models) == 1


class TestResolveLfwParams:
    def test_zeros_and_explicit_values(self):
        assert resolve_lfw_params("eq5").as_dict() == {"alpha": 0.0, "beta": 0.0}
        assert resolve_lfw_params("eq3", params={"alpha": 0.3, "beta": 0.1}).as_dict() == {"alpha": 0.3, "beta": 0.1}

    def test_model_without_lfw_is_rejected(self, artifacts, tmp_path):
        path = tmp_path / "plain.bin"
        train_to_path(artifacts, TrainConfig(dim=4, window=2, epochs=1), str(path))
        with pytest.raises(ValueError, match="without LFW"):
            resolve_lfw_params("", str(path))

    def test_needs_formula_or_model(self):
        with pytest.raises(ValueError):
            resolve_lfw_params("")
