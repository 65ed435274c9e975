import itertools

import pytest
from hypothesis import given, strategies as st

from sentrewrite.oracle import (
    OracleLabel,
    combination_count,
    combination_search,
    format_report,
    greedy_oracle,
    match_selection,
    oracle_report,
    select,
    sentence_match,
)
from sentrewrite.rouge import SummaryScorer, rouge_l_summary
from sentrewrite.textproc import Document, Sentence

sentence_text = st.lists(st.sampled_from("abcdefg"), min_size=1, max_size=5).map(" ".join)


@st.composite
def doc_and_ref(draw, max_sents=6):
    doc = Document.from_texts("d", draw(st.lists(sentence_text, min_size=1, max_size=max_sents)))
    ref = Document.from_texts("r", draw(st.lists(sentence_text, min_size=1, max_size=3)))
    return doc, ref


class TestSentenceMatch:
    def test_ties_go_to_lowest_index(self, abc_doc, abc_ref):
        pairs = sentence_match(abc_doc, abc_ref)
        assert [(p.source_index, p.target_index) for p in pairs] == [(0, 0), (2, 1)]

    def test_exact_sentence_wins(self):
        doc = Document.from_texts("d", ["x y", "p q r"])
        ref = Document.from_texts("r", ["p q r"])
        assert sentence_match(doc, ref)[0].source_index == 1

    def test_disjoint_falls_back_to_index_zero(self):
        doc = Document.from_texts("d", ["x", "y"])
        ref = Document.from_texts("r", ["z"])
        assert sentence_match(doc, ref)[0].source_index == 0

    def test_duplicates_across_targets_kept(self):
        doc = Document.from_texts("d", ["a b c d", "x"])
        ref = Document.from_texts("r", ["a b", "c d"])
        assert [p.source_index for p in sentence_match(doc, ref)] == [0, 0]
        assert match_selection(doc, ref) == (0,)


class TestGreedy:
    def test_trace(self, abc_doc, abc_ref):
        label = greedy_oracle(abc_doc, abc_ref, max_k=3)
        assert label.selected == (0, 2)
        assert label.score.f1 == pytest.approx(10 / 11)
        # the rejected third pick would lower the score
        assert SummaryScorer(abc_ref.sentences, abc_doc.sentences).f1([0, 2, 1]) == \
            pytest.approx(6 / 7)

    def test_verbatim_reference(self):
        doc = Document.from_texts("d", ["x y", "a b", "c d e"])
        ref = Document.from_texts("r", ["a b", "c d e"])
        label = greedy_oracle(doc, ref, 5)
        assert sorted(label.selected) == [1, 2] and label.score.f1 == 1.0

    def test_single_sentence_boundary(self):
        ref = Document.from_texts("r", ["a"])
        assert greedy_oracle(Document.from_texts("d", ["a b"]), ref, 3).selected == (0,)
        assert greedy_oracle(Document.from_texts("d", ["z"]), ref, 3).selected == ()

    def test_max_k(self, abc_doc, abc_ref):
        assert greedy_oracle(abc_doc, abc_ref, max_k=1).selected == (0,)
        with pytest.raises(ValueError):
            greedy_oracle(abc_doc, abc_ref, max_k=0)

    def test_mean_objective_runs(self, abc_doc, abc_ref):
        assert greedy_oracle(abc_doc, abc_ref, 3, objective="mean").selected[0] in (0, 1, 2)

    @given(doc_and_ref())
    def test_each_step_strictly_improves(self, pair):
        doc, ref = pair
        label = greedy_oracle(doc, ref, 5)
        scorer = SummaryScorer(ref.sentences, doc.sentences)
        trace = [0.0] + [scorer.f1(label.selected[:t]) for t in range(1, len(label.selected) + 1)]
        assert all(b > a for a, b in zip(trace, trace[1:]))
        assert len(set(label.selected)) == len(label.selected)


class TestCombination:
    def test_example(self, abc_doc, abc_ref):
        label = combination_search(abc_doc, abc_ref, max_k=5)
        assert label.selected == (0, 2)
        assert label.score.f1 == pytest.approx(10 / 11)

    def test_all_sentences_when_reference_is_the_document(self):
        doc = Document.from_texts("d", ["a b", "c", "d e f"])
        ref = Document.from_texts("r", ["a b c d e f"])
        label = combination_search(doc, ref, max_k=5)
        assert label.selected == (0, 1, 2) and label.score.f1 == 1.0

    def test_size_limit(self):
        doc = Document.from_texts("d", [f"w{i}" for i in range(26)])
        with pytest.raises(ValueError, match="combination search too large"):
            combination_search(doc, Document.from_texts("r", ["w1"]))

    def test_count(self):
        assert combination_count(3, 5) == 7
        assert combination_count(12, 5) == sum(
            1 for k in range(1, 6) for _ in itertools.combinations(range(12), k))

    @given(doc_and_ref())
    def test_dominates_greedy_and_matching(self, pair):
        doc, ref = pair
        best = combination_search(doc, ref, 5).score.f1
        assert best >= greedy_oracle(doc, ref, 5).score.f1
        sel = match_selection(doc, ref)
        if len(sel) <= 5:
            assert best >= rouge_l_summary([doc[i] for i in sel], ref.sentences).f1 - 1e-15

    @given(doc_and_ref(max_sents=5))
    def test_matches_brute_force(self, pair):
        doc, ref = pair
        best = max(rouge_l_summary([doc[i] for i in c], ref.sentences).f1
                   for k in range(1, len(doc) + 1) for c in itertools.combinations(range(len(doc)), k))
        assert combination_search(doc, ref, 5).score.f1 == pytest.approx(best, abs=1e-12)


class TestReport:
    def test_rows_and_ordering(self, abc_doc, abc_ref):
        rows = oracle_report([(abc_doc, abc_ref)])
        assert [r.method for r in rows] == ["match", "greedy", "combo"]
        assert rows[0].rl.f1 <= rows[1].rl.f1 <= rows[2].rl.f1
        assert "combo" in format_report(rows)

    def test_single_method(self, abc_doc, abc_ref):
        assert len(oracle_report([(abc_doc, abc_ref)], methods=["greedy"])) == 1

    def test_rewrite_hook_is_applied(self, abc_doc, abc_ref):
        drop_last = lambda s: Sentence.from_tokens(s.tokens[:-1] or s.tokens)
        plain = oracle_report([(abc_doc, abc_ref)], methods=["combo"])[0].rl.f1
        rewritten = oracle_report([(abc_doc, abc_ref)], methods=["combo"], rewrite=drop_last)
        assert rewritten[0].rl.f1 < plain

    def test_empty_corpus(self):
        with pytest.raises(ValueError, match="empty corpus"):
            oracle_report([])

    def test_unknown_method(self, abc_doc, abc_ref):
        with pytest.raises(ValueError):
            select("beam", abc_doc, abc_ref)


def test_label_json_roundtrip(abc_doc, abc_ref):
    label = greedy_oracle(abc_doc, abc_ref, 3)
    assert OracleLabel.from_json(label.to_json()) == label
