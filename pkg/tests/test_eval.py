"""Metrics: matching, P/R/F1, PR curves with AUC, P@1, micro-F1, positions."""

import pytest

from triplex.bundle import Triple
from triplex.evaluation import (
    GOLD_FORMAT_OIE2016,
    MatchPolicy,
    PRPoint,
    ScoredExtraction,
    auc_from_points,
    classify_relation_position,
    grouped_pr_curve,
    match_extractions,
    normalize_tokens,
    p_at_1,
    pr_curve_and_auc,
    prf_at_threshold,
    rc_f1,
    read_oie_gold,
    relation_position_stats,
)


def scored(head, relation, tail, confidence):
    return ScoredExtraction(
        triple=Triple(head=head, relation=relation, tail=tail),
        confidence=confidence,
    )


GOLD = [
    Triple(head="Fisher", relation="Born in", tail="Glasgow"),
    Triple(head="Fisher", relation="is a graduate of", tail="London Opera Centre"),
    Triple(head="Crick", relation="received", tail="a Nobel Prize"),
    Triple(head="Adobe", relation="acquired", tail="Macromedia"),
]


class TestNormalize:
    def test_lowercase_and_punctuation(self):
        assert normalize_tokens("Born in Glasgow,") == ["born", "in", "glasgow"]
        assert normalize_tokens("hasn't . ,") == ["hasnt"]


class TestMatchExtractions:
    def test_identity_matches_everything(self):
        predicted = [scored(t.head, t.relation, t.tail, 0.9) for t in GOLD]
        matches = match_extractions(predicted, GOLD)
        assert len(matches) == len(GOLD)

    def test_trailing_punctuation_token_matches(self):
        predicted = [scored("Fisher", "Born in", "Glasgow", 0.9)]
        gold = [Triple(head="Fisher", relation="Born in", tail="Glasgow ,")]
        assert len(match_extractions(predicted, gold)) == 1

    def test_disjoint_sets_zero_matches(self):
        predicted = [scored("a", "b", "c", 0.5)]
        assert match_extractions(predicted, GOLD) == []

    def test_one_to_one(self):
        predicted = [scored("Fisher", "Born in", "Glasgow", 0.9),
                     scored("Fisher", "Born in", "Glasgow", 0.8)]
        gold = [Triple(head="Fisher", relation="Born in", tail="Glasgow")]
        assert len(match_extractions(predicted, gold)) == 1

    def test_greedy_by_confidence(self):
        predicted = [scored("Fisher", "Born in", "Glasgow", 0.2),
                     scored("Fisher", "Born in", "Glasgow", 0.9)]
        gold = [Triple(head="Fisher", relation="Born in", tail="Glasgow")]
        matches = match_extractions(predicted, gold)
        assert matches == [(1, 0)]

    def test_head_token_rule(self):
        # Shared tokens but different final (head) token: no match.
        predicted = [scored("the Opera Centre school", "x", "y", 0.5)]
        gold = [Triple(head="the Opera Centre", relation="x", tail="y")]
        assert match_extractions(predicted, gold) == []
        relaxed = MatchPolicy(require_head_match=False)
        assert len(match_extractions(predicted, gold, relaxed)) == 1

    def test_overlap_fraction_rule(self):
        # Shorter element: 1 of 2 tokens shared = 0.5, passes at the default.
        predicted = [scored("very longer phrase Glasgow", "Born in", "Fisher", 0.5)]
        gold = [Triple(head="old Glasgow", relation="Born in", tail="Fisher")]
        assert len(match_extractions(predicted, gold)) == 1
        strict = MatchPolicy(min_overlap=0.8)
        assert match_extractions(predicted, gold, strict) == []


class TestPrf:
    def test_perfect_predictions(self):
        predicted = [scored(t.head, t.relation, t.tail, 0.9) for t in GOLD]
        assert prf_at_threshold(predicted, GOLD, threshold=0.0) == (1.0, 1.0, 1.0)

    def test_two_of_three_against_four(self):
        predicted = [
            scored("Fisher", "Born in", "Glasgow", 0.9),
            scored("Crick", "received", "a Nobel Prize", 0.8),
            scored("not", "a real", "triple", 0.7),
        ]
        precision, recall, f1 = prf_at_threshold(predicted, GOLD)
        assert precision == pytest.approx(2 / 3)
        assert recall == pytest.approx(1 / 2)
        assert f1 == pytest.approx(4 / 7)

    def test_threshold_above_everything(self):
        predicted = [scored("Fisher", "Born in", "Glasgow", 0.4)]
        assert prf_at_threshold(predicted, GOLD, threshold=0.5) == (0.0, 0.0, 0.0)


class TestPRCurve:
    def test_single_correct_prediction(self):
        predicted = [scored("Fisher", "Born in", "Glasgow", 0.7)]
        gold = [Triple(head="Fisher", relation="Born in", tail="Glasgow")]
        curve = pr_curve_and_auc(predicted, gold)
        assert len(curve.points) == 1
        point = curve.points[0]
        assert (point.threshold, point.precision, point.recall) == (0.7, 1.0, 1.0)
        assert curve.auc == pytest.approx(1.0)

    def test_two_point_trapezoid_with_anchor(self):
        points = [PRPoint(threshold=0.9, precision=1.0, recall=0.5),
                  PRPoint(threshold=0.1, precision=0.5, recall=1.0)]
        assert auc_from_points(points) == pytest.approx(0.875)

    def test_all_wrong_auc_zero(self):
        predicted = [scored("x", "y", "z", 0.9), scored("q", "r", "s", 0.5)]
        curve = pr_curve_and_auc(predicted, GOLD)
        assert curve.auc == 0.0

    def test_empty_predictions_empty_curve(self):
        curve = pr_curve_and_auc([], GOLD)
        assert curve.points == []
        assert curve.auc == 0.0

    def test_curve_point_consistent_with_prf(self):
        predicted = [
            scored("Fisher", "Born in", "Glasgow", 0.9),
            scored("not", "a real", "triple", 0.6),
            scored("Crick", "received", "a Nobel Prize", 0.3),
        ]
        curve = pr_curve_and_auc(predicted, GOLD)
        for point in curve.points:
            precision, recall, f1 = prf_at_threshold(predicted, GOLD,
                                                     threshold=point.threshold)
            assert (precision, recall) == (point.precision, point.recall)
            assert point.f1 == pytest.approx(f1)

    def test_dominated_curve_has_smaller_auc(self):
        high = [PRPoint(0.9, 1.0, 0.5), PRPoint(0.1, 0.8, 1.0)]
        low = [PRPoint(0.9, 0.5, 0.5), PRPoint(0.1, 0.4, 1.0)]
        assert auc_from_points(low) < auc_from_points(high)

    def test_grouped_matching_stays_sentence_local(self):
        # The same surface triple in another sentence's group must not match.
        group_a = ([scored("Fisher", "Born in", "Glasgow", 0.9)],
                   [Triple(head="Fisher", relation="Born in", tail="Glasgow")])
        group_b = ([scored("Fisher", "Born in", "Glasgow", 0.8)], [])
        curve = grouped_pr_curve([group_a, group_b])
        by_threshold = {p.threshold: p for p in curve.points}
        assert by_threshold[0.8].precision == pytest.approx(0.5)


class TestPAt1:
    def test_all_correct(self):
        assert p_at_1({"a": "Glasgow"}, {"a": "Glasgow"}) == 1.0

    def test_abstention_counts_as_wrong(self):
        predictions = {"a": "Glasgow", "b": None}
        gold = {"a": "glasgow", "b": "1902"}
        assert p_at_1(predictions, gold) == 0.5

    def test_whitespace_normalized(self):
        assert p_at_1({"a": "  London  Opera "}, {"a": "london opera"}) == 1.0

    def test_empty_fact_set_errors(self):
        with pytest.raises(ValueError):
            p_at_1({}, {})

    def test_unknown_fact_id_errors(self):
        with pytest.raises(ValueError):
            p_at_1({"a": "x", "zzz": "y"}, {"a": "x"})


class TestRcF1:
    def test_perfect_no_null(self):
        assert rc_f1({"a": "x", "b": "y"}, {"a": "x", "b": "y"}) == 1.0

    def test_micro_f1_closed_form(self):
        # 10 samples, null-aware: 6 exact hits, 2 false positives where gold
        # is null, 2 misses predicted null. TP=6, FP=2, FN=2 -> F1 = 0.75.
        gold = {f"s{i}": "rel_a" for i in range(6)}
        gold.update({f"s{i}": "no_relation" for i in range(6, 8)})
        gold.update({f"s{i}": "rel_b" for i in range(8, 10)})
        preds = {f"s{i}": "rel_a" for i in range(6)}
        preds.update({f"s{i}": "rel_a" for i in range(6, 8)})
        preds.update({f"s{i}": "no_relation" for i in range(8, 10)})
        assert rc_f1(preds, gold, null_label="no_relation") == pytest.approx(0.75)

    def test_all_null_warns_and_returns_zero(self):
        with pytest.warns(UserWarning):
            score = rc_f1({"a": "no_relation"}, {"a": "no_relation"},
                          null_label="no_relation")
        assert score == 0.0

    def test_missing_prediction_errors(self):
        with pytest.raises(ValueError):
            rc_f1({}, {"a": "x"})


class TestRelationPositions:
    def test_between(self):
        sentence = "Fisher is a graduate of the London Opera Centre ."
        triple = Triple(head="Fisher", relation="is a graduate of",
                        tail="the London Opera Centre")
        assert classify_relation_position(sentence, triple) == "middle"

    def test_left(self):
        sentence = "Born in Glasgow , Fisher is a graduate ."
        triple = Triple(head="Fisher", relation="Born in", tail="Glasgow")
        assert classify_relation_position(sentence, triple) == "left"

    def test_right(self):
        sentence = "Denise Maloney Pictou , one of Aquash 's daughters ."
        triple = Triple(head="Denise Maloney Pictou", relation="daughters",
                        tail="Aquash")
        assert classify_relation_position(sentence, triple) == "right"

    def test_unlocatable_counted_separately(self):
        entries = [("a b c", Triple(head="a", relation="zz", tail="c"))]
        counts = relation_position_stats(entries)
        assert counts.unlocated == 1
        assert counts.total == 0

    def test_synthetic_counts(self, fixture_tree):
        entries = read_oie_gold(fixture_tree / "gold" / "positions_gold.tsv")
        counts = relation_position_stats(entries)
        assert (counts.left, counts.right, counts.middle) == (1, 1, 2)
        assert counts.total == 4
        assert counts.outside_fraction == pytest.approx(0.5)

    def test_single_middle_triple(self):
        entries = [("a rel b", Triple(head="a", relation="rel", tail="b"))]
        counts = relation_position_stats(entries)
        assert (counts.left, counts.right, counts.middle, counts.total) == \
            (0, 0, 1, 1)


class TestGoldReaders:
    def test_spec_format(self, tmp_path):
        path = tmp_path / "g.tsv"
        path.write_text("the sentence\thead\trel\ttail\n")
        entries = read_oie_gold(path)
        assert entries[0][0] == "the sentence"
        assert entries[0][1] == Triple(head="head", relation="rel", tail="tail")

    def test_oie2016_column_order(self, tmp_path):
        path = tmp_path / "g.tsv"
        path.write_text("the sentence\trel\targ1\targ2\targ3\n")
        entries = read_oie_gold(path, fmt=GOLD_FORMAT_OIE2016)
        assert entries[0][1] == Triple(head="arg1", relation="rel", tail="arg2")

    def test_short_line_rejected(self, tmp_path):
        path = tmp_path / "g.tsv"
        path.write_text("just a sentence\n")
        with pytest.raises(ValueError):
            read_oie_gold(path)
