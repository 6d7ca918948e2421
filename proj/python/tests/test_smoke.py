import json
import math
import os
import pathlib

import pytest

import termret

DATA = pathlib.Path(os.environ.get("TERMRET_TEST_DATA", pathlib.Path(__file__).parents[2] / "tests" / "data"))


def test_tree_scores():
    a = termret.Tree.parse("(S (NP (DT the) (NN rotor)) (VP (VBZ spins)))")
    b = termret.Tree.parse("(S (NP (DT the) (NN heart)) (VP (VBZ beats)))")
    c = termret.Tree.parse("(S (NP (NN rain)) (VP (VBZ falls) (ADVP (RB hard))))")
    assert len(a) == 6 and a.tokens() == ["the", "rotor", "spins"]
    # Words do not matter, only the shape.
    assert termret.tree_similarity(a, b) == 1.0
    assert termret.tree_edit_distance(a, b) == 0
    assert termret.tree_edit_distance(a, c) == 3
    assert 0.0 < termret.tree_similarity(a, c, 1.0, "production") < 1.0


def test_hungarian_and_bm25():
    pairs, cost = termret.hungarian([[4, 1], [2, 3]])
    assert pairs == [(0, 1), (1, 0)] and cost == 3
    idx = termret.Bm25Index(["rotor speed", "blood pressure"])
    assert idx.scores("rotor")[0] == pytest.approx(math.log(2.0))
    assert idx.scores("cough") == [0.0, 0.0]


def test_errors_carry_kind():
    with pytest.raises(termret.Error) as info:
        termret.Tree.parse("(S (NP")
    assert info.value.kind == "UnbalancedBrackets"
    assert info.value.exit_code == 2


def test_prompt_and_scoring():
    text = termret.instruction("heart_failure")
    assert "heart failure domain" in text and "[DEMONSTRATIONS]" in text
    assert termret.parse_response("No term") == []
    assert termret.parse_response("ejection fraction, edema\nignored") == ["ejection fraction", "edema"]
    assert termret.match_counts(["a", "b"], ["b", "c"]) == (1, 1, 1)
    ci = termret.bootstrap_ci([(1, 0, 0)] * 5 + [(0, 1, 1)] * 5, resamples=500, seed=3)
    assert 0.0 <= ci["f1"]["lo"] <= 0.5 <= ci["f1"]["hi"] <= 1.0
    assert termret.paired_pvalue([(1, 0, 0)] * 4, [(1, 0, 0)] * 4) == 1.0


def test_corpus_stats():
    stats = termret.corpus_stats(DATA / "stats_fixture.jsonl")
    assert (stats["n_sentences"], stats["total_words"], stats["total_terms"]) == (3, 16, 3)
    assert termret.load_corpus(DATA / "queries.jsonl")[0]["id"] == "q1"


def test_bad_config_key_is_a_config_error():
    with pytest.raises(termret.Error) as info:
        termret.run_experiment(overrides={"no_such_key": "1"})
    assert info.value.exit_code == 1
