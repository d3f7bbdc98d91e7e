"""Task adapters: generate -> rank -> decode for each task."""

import pytest

from triplex.aliases import load_dictionary, attach_task_map
from triplex.bundle import AnnotationKind, SentenceBundle, SpanAnnotation, TokenSpan
from triplex.fixtures import (
    build_attention,
    fp_sample_bundles,
    oie_running_example_bundle,
    rc_sample_bundle,
    tokens_from_text,
)
from triplex.ranking import RAW_SEARCH_SCORE, ToyEncoder
from triplex.search import BeamParams, PositionMode
from triplex.tasks import (
    TASK_FP,
    TASK_OIE,
    TASK_RC,
    default_config,
    run_factual_probe,
    run_oie,
    run_relation_classification,
)


@pytest.fixture(scope="module")
def dictionary(tmp_path_factory):
    from triplex.fixtures import write_fixture_tree

    root = write_fixture_tree(tmp_path_factory.mktemp("dicts"))
    d = load_dictionary(root / "dicts" / "predicates.tsv")
    attach_task_map(d, "tacred", root / "dicts" / "taskmap.tacred.tsv")
    return d


class TestDefaults:
    def test_task_defaults(self):
        assert default_config(TASK_OIE).beam.beam_size == 6
        assert default_config(TASK_OIE).top_n == 1
        assert default_config(TASK_RC).top_n == 10
        assert default_config(TASK_FP).beam.beam_size == 20
        assert default_config(TASK_FP).top_n == 1

    def test_dev_tuned_override(self):
        assert default_config(TASK_OIE, top_n=3).top_n == 3


class TestRunOie:
    def test_running_example_contains_both_triples(self):
        predictions = run_oie(oie_running_example_bundle(),
                              default_config(TASK_OIE, top_n=2), ToyEncoder())
        surfaces = {p.triple.surface() for p in predictions}
        assert "(Fisher; Born in; Glasgow)" in surfaces
        assert "(Fisher; is a graduate of; London Opera Centre)" in surfaces

    def test_ranked_order_prefers_token_overlap(self):
        predictions = run_oie(oie_running_example_bundle(),
                              default_config(TASK_OIE, top_n=2), ToyEncoder())
        assert predictions[0].triple.relation == "is a graduate of"

    def test_raw_mode_orders_by_search_score(self):
        config = default_config(TASK_OIE, top_n=2,
                                ranking_mode=RAW_SEARCH_SCORE)
        predictions = run_oie(oie_running_example_bundle(), config, None)
        assert predictions[0].triple.relation == "Born in"
        assert predictions[0].confidence == pytest.approx(0.9, abs=1e-6)

    def test_single_np_yields_nothing(self):
        bundle = SentenceBundle(
            sentence_id="one-np",
            tokens=tokens_from_text("only Glasgow here ."),
            annotations=[SpanAnnotation(span=TokenSpan(1, 2),
                                        kind=AnnotationKind.NP)],
            attention=build_attention(4, {}),
        )
        assert run_oie(bundle, default_config(TASK_OIE), ToyEncoder()) == []

    def test_between_only_drops_left_relation(self):
        beam = BeamParams(beam_size=6,
                          position_modes=(PositionMode.BETWEEN,))
        predictions = run_oie(oie_running_example_bundle(),
                              default_config(TASK_OIE, top_n=2, beam=beam),
                              ToyEncoder())
        surfaces = {p.triple.surface() for p in predictions}
        assert surfaces == {"(Fisher; is a graduate of; London Opera Centre)"}

    def test_head_differs_from_tail_and_relation_nonempty(self):
        for p in run_oie(oie_running_example_bundle(),
                         default_config(TASK_OIE, top_n=5), ToyEncoder()):
            assert p.triple.relation
            assert p.triple.head_span != p.triple.tail_span

    def test_negated_multiword_relation(self):
        # One NP pair, five-token relation between them.
        text = "He hasn't been able to replace the M'Bow cabal ."
        bundle = SentenceBundle(
            sentence_id="oie-mbow",
            tokens=tokens_from_text(text),
            annotations=[
                SpanAnnotation(span=TokenSpan(0, 1), kind=AnnotationKind.NP),
                SpanAnnotation(span=TokenSpan(6, 9), kind=AnnotationKind.NP),
            ],
            attention=build_attention(10, {
                (1, 0): 0.7, (2, 1): 0.7, (3, 2): 0.7, (4, 3): 0.7,
                (5, 4): 0.7, (6, 5): 0.7,
            }),
        )
        predictions = run_oie(bundle, default_config(TASK_OIE, top_n=1),
                              ToyEncoder())
        surfaces = [p.triple.surface() for p in predictions]
        assert "(He; hasn't been able to replace; the M'Bow cabal)" in surfaces

    def test_provenance_positions_consistent(self):
        bundle = oie_running_example_bundle()
        for p in run_oie(bundle, default_config(TASK_OIE, top_n=5), ToyEncoder()):
            region_check = {
                PositionMode.LEFT_OF_BOTH:
                    lambda t, pr: t < min(pr.s_span.start, pr.e_span.start),
                PositionMode.RIGHT_OF_BOTH:
                    lambda t, pr: t >= max(pr.s_span.end, pr.e_span.end),
                PositionMode.BETWEEN:
                    lambda t, pr: (min(pr.s_span.end, pr.e_span.end) <= t
                                   < max(pr.s_span.start, pr.e_span.start)),
            }[p.provenance.position_mode]
            assert all(region_check(t, p.provenance)
                       for t in p.provenance.token_path)


class TestRunRelationClassification:
    def test_tacred_sample_decodes_child(self, dictionary):
        config = default_config(TASK_RC, category="tacred",
                                null_label="no_relation")
        result = run_relation_classification(rc_sample_bundle(), config,
                                             ToyEncoder(), dictionary)
        assert result.label == "per:children"
        assert result.labels == ("per:children",)
        assert not result.abstained

    def test_relation_tokens_inside_linked_span(self, dictionary):
        config = default_config(TASK_RC, category="tacred",
                                null_label="no_relation")
        result = run_relation_classification(rc_sample_bundle(), config,
                                             ToyEncoder(), dictionary)
        link_spans = [a.span for a in
                      rc_sample_bundle().spans_of_kind(AnnotationKind.RELATION_LINK)]
        for _, _, _, provenance in result.candidates:
            assert any(all(span.contains(t) for t in provenance.token_path)
                       for span in link_spans)

    def test_no_link_abstains_to_null_label(self, dictionary):
        bundle = SentenceBundle(
            sentence_id="no-link",
            tokens=tokens_from_text("Alice met Bob yesterday ."),
            annotations=[
                SpanAnnotation(span=TokenSpan(0, 1), kind=AnnotationKind.GOLD),
                SpanAnnotation(span=TokenSpan(2, 3), kind=AnnotationKind.GOLD),
            ],
            attention=build_attention(5, {(1, 0): 0.5, (2, 1): 0.5}),
        )
        config = default_config(TASK_RC, category="tacred",
                                null_label="no_relation")
        result = run_relation_classification(bundle, config, ToyEncoder(),
                                             dictionary)
        assert result.abstained
        assert result.label == "no_relation"
        assert result.labels == ()

    def test_fewrel_style_abstention_has_no_label(self, dictionary):
        from triplex.aliases import IDENTITY_TASK_MAP, attach_task_map

        attach_task_map(dictionary, "identity", IDENTITY_TASK_MAP)
        bundle = SentenceBundle(
            sentence_id="no-link-fewrel",
            tokens=tokens_from_text("Alice met Bob yesterday ."),
            annotations=[
                SpanAnnotation(span=TokenSpan(0, 1), kind=AnnotationKind.GOLD),
                SpanAnnotation(span=TokenSpan(2, 3), kind=AnnotationKind.GOLD),
            ],
            attention=build_attention(5, {}),
        )
        config = default_config(TASK_RC, category="identity")
        result = run_relation_classification(bundle, config, ToyEncoder(),
                                             dictionary)
        assert result.abstained
        assert result.label is None

    def test_identity_category_decodes_spouse(self, dictionary):
        from triplex.aliases import IDENTITY_TASK_MAP, attach_task_map

        attach_task_map(dictionary, "identity", IDENTITY_TASK_MAP)
        text = "Theodore II Palaiologos and his wife Helena Draga ."
        bundle = SentenceBundle(
            sentence_id="rc-fewrel-0001",
            tokens=tokens_from_text(text),
            annotations=[
                SpanAnnotation(span=TokenSpan(0, 3), kind=AnnotationKind.GOLD),
                SpanAnnotation(span=TokenSpan(6, 8), kind=AnnotationKind.GOLD),
                SpanAnnotation(span=TokenSpan(5, 6),
                               kind=AnnotationKind.RELATION_LINK,
                               predicate_id="spouse"),
            ],
            attention=build_attention(9, {
                (5, 2): 0.8,  # Palaiologos -> wife
                (6, 5): 0.8,  # wife -> Helena (terminal into the tail)
            }),
        )
        config = default_config(TASK_RC, category="identity")
        result = run_relation_classification(bundle, config, ToyEncoder(),
                                             dictionary)
        assert result.label == "spouse"

    def test_top1_contained_in_hit_set(self, dictionary):
        config = default_config(TASK_RC, category="tacred",
                                null_label="no_relation")
        result = run_relation_classification(rc_sample_bundle(), config,
                                             ToyEncoder(), dictionary)
        if not result.abstained:
            assert result.label in result.labels

    def test_category_required(self, dictionary):
        with pytest.raises(ValueError):
            run_relation_classification(rc_sample_bundle(),
                                        default_config(TASK_RC),
                                        ToyEncoder(), dictionary)


class TestRunFactualProbe:
    def test_decodes_birth_year(self, dictionary):
        bundle, _ = fp_sample_bundles()
        result = run_factual_probe(bundle, default_config(TASK_FP),
                                   ToyEncoder(), dictionary)
        assert result.tail == "1941"
        assert result.predicate_id == "date_of_birth"
        assert result.triple.surface() == "(Peter F Martin; date_of_birth; 1941)"

    def test_missing_link_abstains(self, dictionary):
        _, bundle = fp_sample_bundles()
        result = run_factual_probe(bundle, default_config(TASK_FP),
                                   ToyEncoder(), dictionary)
        assert result.abstained
        assert result.tail is None

    def test_tail_never_overlaps_gold_head(self, dictionary):
        bundle, _ = fp_sample_bundles()
        result = run_factual_probe(bundle, default_config(TASK_FP),
                                   ToyEncoder(), dictionary)
        heads = [a.span for a in bundle.spans_of_kind(AnnotationKind.GOLD_NP)]
        for token in result.provenance.token_path:
            assert not any(h.contains(token) for h in heads)

    def test_tail_inside_single_candidate_np(self, dictionary):
        bundle, _ = fp_sample_bundles()
        result = run_factual_probe(bundle, default_config(TASK_FP),
                                   ToyEncoder(), dictionary)
        nps = [a.span for a in bundle.spans_of_kind(AnnotationKind.NP)]
        assert any(all(span.contains(t) for t in result.provenance.token_path)
                   for span in nps)

    def test_gold_head_required(self, dictionary):
        bundle = oie_running_example_bundle()
        with pytest.raises(ValueError):
            run_factual_probe(bundle, default_config(TASK_FP), ToyEncoder(),
                              dictionary)

    def test_running_example_probe_decodes_glasgow(self, dictionary):
        # Probe variant of the inverted sentence: anchor on the gold head
        # and the linked phrase left of it; the tail comes from the NP
        # between them.
        text = "Born in Glasgow , Fisher is a graduate of the London Opera Centre ."
        bundle = SentenceBundle(
            sentence_id="fp-running-example",
            tokens=tokens_from_text(text),
            annotations=[
                SpanAnnotation(span=TokenSpan(0, 2),
                               kind=AnnotationKind.RELATION_LINK,
                               predicate_id="place_of_birth"),
                SpanAnnotation(span=TokenSpan(2, 3), kind=AnnotationKind.NP),
                SpanAnnotation(span=TokenSpan(4, 5), kind=AnnotationKind.GOLD_NP),
                SpanAnnotation(span=TokenSpan(10, 13), kind=AnnotationKind.NP),
            ],
            attention=build_attention(14, {
                (2, 4): 0.7,  # Fisher -> Glasgow
                (0, 2): 0.7,  # Glasgow -> Born (terminal into the link)
            }),
        )
        result = run_factual_probe(bundle, default_config(TASK_FP),
                                   ToyEncoder(), dictionary)
        assert result.tail == "Glasgow"
        assert result.predicate_id == "place_of_birth"
        assert result.triple.surface() == "(Fisher; place_of_birth; Glasgow)"
