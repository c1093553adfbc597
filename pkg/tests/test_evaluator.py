import json

import numpy as np
import pytest

from embedding_forge.errors import QuestionFormatError
from embedding_forge.evaluator import (
    AnalogyQuestion,
    answer,
    compare_reports,
    display_name,
    evaluate,
    format_comparison,
    format_report,
    load_questions,
    most_similar,
    section_of,
    solve_analogy,
)
from embedding_forge.model_io import ModelFile


def write_questions(tmp_path, text):
    path = tmp_path / "q.txt"
    path.write_text(text, encoding="utf-8")
    return path


class TestLoadQuestions:
    def test_categories_and_lowercasing(self, questions_file):
        questions = load_questions(questions_file)
        assert len(questions) == 4
        assert questions[1] == AnalogyQuestion("paris", "france", "london", "england", "capital-common-countries")
        assert [q.category for q in questions].count("gram3-comparative") == 2

    def test_wrong_word_count_reports_the_line(self, tmp_path):
        path = write_questions(tmp_path, ": family\nboy girl brother sister\nboy girl brother\n")
        with pytest.raises(QuestionFormatError) as excinfo:
            load_questions(path)
        assert excinfo.value.line_number == 3
        assert "line 3" in str(excinfo.value)

    def test_question_before_header(self, tmp_path):
        path = write_questions(tmp_path, "boy girl brother sister\n")
        with pytest.raises(QuestionFormatError, match="header"):
            load_questions(path)


def test_sections_and_display_names():
    assert section_of("gram7-past-tense") == "syntactic"
    assert section_of("city-in-state") == "semantic"
    assert display_name("gram7-past-tense") == "past-tense"
    assert display_name("family") == "family"


class TestEvaluate:
    def test_answers_and_out_of_vocabulary_questions(self, toy_model, tmp_path):
        path = write_questions(tmp_path, (
            ": family\n"
            "man king woman queen\n"
            "man king woman apple\n"
            "man king woman unicorn\n"
            ": gram1-adjective-to-adverb\n"
            "man woman king queen\n"
        ))
        report = evaluate(toy_model, load_questions(path))
        family = report.categories[0]
        assert (family.correct, family.total, family.skipped) == (1, 3, 1)
        assert family.accuracy == pytest.approx(1 / 3)
        assert report.semantic.total == 3
        assert report.syntactic.total == 1
        assert report.total.total == 4
        assert report.skipped == 1

    def test_input_words_are_excluded(self, toy_model):
        # without exclusion the nearest vector to king - man + man is king itself
        question = AnalogyQuestion("man", "king", "man", "queen", "family")
        assert answer(toy_model, question) != toy_model.index["king"]
        assert answer(toy_model, question) != toy_model.index["man"]

    def test_ties_go_to_the_lowest_index(self):
        vectors = np.array([[1, 0, 0], [0, 1, 0], [0, 0, 1], [0, 1, 1], [0, 1, 1]], dtype=np.float32)
        model = ModelFile(["a", "b", "c", "twin1", "twin2"], vectors)
        question = AnalogyQuestion("a", "b", "c", "twin1", "x")
        assert answer(model, question) == 3
        assert evaluate(model, [question]).total.correct == 1

    def test_batch_size_does_not_change_results(self, toy_model):
        rng = np.random.default_rng(0)
        words = toy_model.words
        questions = [AnalogyQuestion(*rng.choice(words, 4, replace=False), category="family") for _ in range(40)]
        small = evaluate(toy_model, questions, batch_size=1)
        large = evaluate(toy_model, questions, batch_size=256)
        assert small.total.correct == large.total.correct

    def test_evaluation_matches_single_question_answers(self, toy_model):
        rng = np.random.default_rng(1)
        questions = [AnalogyQuestion(*rng.choice(toy_model.words, 4, replace=False), category="c")
                     for _ in range(30)]
        expected = sum(answer(toy_model, q) == toy_model.index[q.expected] for q in questions)
        assert evaluate(toy_model, questions).total.correct == expected

    @pytest.mark.parametrize("factor", [0.25, 3.0, 1000.0])
    def test_positive_rescaling_keeps_every_answer(self, factor):
        rng = np.random.default_rng(2)
        words = [f"w{i}" for i in range(20)]
        vectors = rng.normal(size=(20, 8)).astype(np.float32)
        model = ModelFile(words, vectors)
        scaled = ModelFile(words, vectors * np.float32(factor))
        questions = [AnalogyQuestion(*rng.choice(words, 4, replace=False), category="c") for _ in range(30)]
        assert [answer(scaled, q) for q in questions] == [answer(model, q) for q in questions]
        assert evaluate(scaled, questions).total.correct == evaluate(model, questions).total.correct

    def test_empty_question_list(self, toy_model):
        report = evaluate(toy_model, [])
        assert report.categories == []
        assert (report.total.correct, report.total.total, report.skipped) == (0, 0, 0)
        assert report.total.accuracy == 0.0

    def test_repeated_word_falls_back_to_the_remaining_vocabulary(self):
        model = ModelFile(["x", "y", "z"], np.eye(3, dtype=np.float32))
        question = AnalogyQuestion("x", "x", "y", "z", "c")
        assert answer(model, question) == 2
        assert evaluate(model, [question]).total.correct == 1


def test_most_similar_excludes_the_query(toy_model):
    neighbours = most_similar(toy_model, "apple", topn=2)
    assert neighbours[0][0] == "pear"
    assert "apple" not in [w for w, _ in neighbours]
    with pytest.raises(KeyError):
        most_similar(toy_model, "unicorn")


def test_solve_analogy(toy_model):
    candidates = solve_analogy(toy_model, "man", "king", "woman", topn=2)
    assert candidates[0][0] == "queen"
    assert candidates[0][1] > candidates[1][1]


class TestReporting:
    @pytest.fixture
    def report(self, toy_model, questions_file):
        return evaluate(toy_model, load_questions(questions_file))

    def test_table_lists_sections_in_order(self, report):
        lines = format_report(report, "table").splitlines()
        names = [line.split()[0] for line in lines[2:-1]]
        assert names == ["Semantic", "capital-common-countries", "Syntactic", "comparative", "Total"]
        assert lines[-1].split()[-1] == "4"

    def test_csv_and_json(self, report):
        csv_text = format_report(report, "csv")
        assert csv_text.splitlines()[0] == "category,section,correct,total,skipped,accuracy"
        data = json.loads(format_report(report, "json"))
        assert data["total"]["total"] == 4
        assert data["skipped"] == 4

    def test_unknown_format(self, report):
        with pytest.raises(ValueError):
            format_report(report, "xml")

    def test_comparison_deltas(self, toy_model, tmp_path):
        path = write_questions(tmp_path, ": family\nman king woman queen\nman king woman apple\n")
        questions = load_questions(path)
        baseline = evaluate(toy_model, questions)
        vectors = toy_model.vectors.copy()
        # pear takes the answer direction, so both questions now miss
        vectors[3] = [0, 0, 0, 1]
        vectors[5] = [0, 1, 1, 0]
        candidate = evaluate(ModelFile(toy_model.words, vectors), questions)
        deltas = {d.name: d for d in compare_reports(baseline, candidate)}
        assert deltas["family"].absolute == pytest.approx(-0.5)
        assert deltas["family"].relative == pytest.approx(-1.0)
        assert deltas["Syntactic"].relative is None
        assert "family" in format_comparison(list(deltas.values()))
