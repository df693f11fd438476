import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from helpers import RecordingModel, entity, make_engine, table
from tablegen.engine import FileHits, MissingModelError, ModelSet
from tablegen.schema_determination import (
    ar_components, attribute_retrieval, column_population, drel, entity_enhanced_cp, esc_label,
    expanded_candidates, label_features, match_component, p_s_given_t, rank_labels,
)


@pytest.fixture(scope="module")
def evidence(engine, world):
    return engine.table_evidence(engine.tokens(world.query))


@pytest.fixture(scope="module")
def oracle_ptab(corpus, engine, world):
    docs = {t.id: oracles.table_tokens(t) for t in corpus.tables}
    return oracles.p_table(oracles.bm25(docs, oracles.tokenize(world.query)), engine.config.table_k)


@pytest.fixture(scope="module")
def labels_of(corpus):
    return {t.id: oracles.table_label_set(t) for t in corpus.tables}


class TestPst:
    def test_examples(self, engine):
        assert p_s_given_t(engine, "birth day", ["Birthday", "Name"]) == 1
        assert p_s_given_t(engine, "population", ["Name", "Area"]) == 0
        assert p_s_given_t(engine, "x", []) == 0

    def test_gamma_range(self, engine):
        with pytest.raises(ValueError):
            p_s_given_t(engine, "a", ["a"], gamma=1.5)


def test_p_table_matches_oracle(evidence, oracle_ptab):
    assert evidence.p_table.keys() == oracle_ptab.keys()
    for tid, p in oracle_ptab.items():
        assert evidence.p_table[tid] == pytest.approx(p, abs=1e-12)


def test_column_population_matches_oracle(engine, evidence, oracle_ptab, labels_of):
    probe = ["length", "lenght", "artist", "mouths", "river", "song", "population", "basins", "genre"]
    cp = column_population(engine, evidence, probe)
    for s in probe:
        want = oracles.column_population(labels_of, oracle_ptab, s, 0.8)
        supported = any(oracles.similarity(s, x) >= 0.8 for tid in oracle_ptab for x in labels_of[tid])
        if supported:
            assert cp[s] == pytest.approx(want, abs=1e-12), s
        else:
            assert s not in cp


def test_entity_cp_matches_oracle(engine, corpus, world, evidence, oracle_ptab, labels_of):
    core_of = {t.id: t.core_entities for t in corpus.tables}
    for ents in (world.relevant_entities[:4], world.distractor_entities[:3],
                 world.relevant_entities[:2] + world.distractor_entities[:2]):
        probe = ["length", "artist", "basin", "river", "song"]
        got = entity_enhanced_cp(engine, evidence, ents, probe)
        for s in probe:
            assert got[s] == pytest.approx(oracles.entity_cp(labels_of, core_of, oracle_ptab, ents, s, 0.8),
                                           abs=1e-12)


def test_entity_cp_coverage_half():
    ents = ["e1", "e2", "e3", "e4"]
    t = table("T", ["Name", "Height"], [["@e1", "1"], ["@e2", "2"], ["@x", "3"]], caption="peaks")
    eng = make_engine([t], [entity(e, "peak") for e in ents + ["x"]])
    ev = eng.table_evidence(["peaks"])
    assert entity_enhanced_cp(eng, ev, ents, ["height"])["height"] == pytest.approx(0.5)
    with pytest.raises(ValueError):
        entity_enhanced_cp(eng, ev, [], ["height"])


class TestAttributeRetrieval:
    def test_match_matches_oracle(self, engine, corpus, world):
        for t in corpus.tables:
            for e in world.relevant_entities[:3] + world.distractor_entities[:2]:
                desc = oracles.tokenize(corpus.kb[e].description)
                for s in ("length", "artist", "basin", "nothing"):
                    got = match_component(engine, s, e, t.id)
                    assert got == pytest.approx(oracles.match_component(t, desc, e, s), abs=1e-12)

    def test_drel(self, evidence):
        items = evidence.ranking.items
        n = len(items)
        assert drel(evidence, items[0]) == pytest.approx((n - 1) / n)
        assert drel(evidence, items[-1]) == 0.0
        assert drel(evidence, "missing") == 0.0

    def test_search_hits(self, corpus, config, world):
        from tablegen import Engine
        e = world.relevant_entities[0]
        eng = Engine.build(corpus, config, hits=FileHits({("length", e): 2_000_000, ("mouth", e): 10}))
        ev = eng.table_evidence(["rivers"])
        assert ar_components(eng, "Length", e, ev)[2] == 1.0
        assert ar_components(eng, "mouth", e, ev)[2] == 0.0

    def test_all_entities_hold_label_without_tables(self):
        ents = [entity(f"e{i}", "x", capacity=["1"]) for i in range(3)]
        eng = make_engine([], ents, ar_weights=(1, 1, 1, 1))
        ev = eng.table_evidence(["nothing"])
        assert ev.best is None
        assert attribute_retrieval(eng, "capacity", [e.id for e in ents], ev) == pytest.approx(1.0)
        assert attribute_retrieval(eng, "colour", [e.id for e in ents], ev) == 0.0


def test_esc_seven_of_ten():
    ents = [entity(f"e{i}", "x", **({"capacity": ["1"]} if i < 7 else {})) for i in range(10)]
    eng = make_engine([], ents)
    assert esc_label(eng, "capacity", [e.id for e in ents]) == pytest.approx(0.7)
    with pytest.raises(ValueError):
        esc_label(eng, "capacity", [])


class TestRanking:
    def test_round_zero_features(self, engine, world, evidence):
        q = engine.tokens(world.query)
        r = rank_labels(engine, q, (), evidence=evidence)
        assert np.all(r.features[:, [1, 3, 4]] == 0)
        assert "length" in r.candidates

    def test_expansion_adds_entity_labels(self, engine, world, evidence):
        q = engine.tokens(world.query)
        base = rank_labels(engine, q, (), evidence=evidence).candidates
        songs = world.distractor_entities[:2]
        exp = rank_labels(engine, q, songs, evidence=evidence).candidates
        assert set(base) <= set(exp)
        assert set(expanded_candidates(engine, songs)) <= set(exp)

    def test_rivers_put_river_labels_first(self, engine, world, evidence):
        q = engine.tokens(world.query)
        r = rank_labels(engine, q, world.relevant_entities, evidence=evidence)
        top = r.ranking.items[:7]
        assert set(top) == {"river", "length", "source", "mouth", "country", "basin", "discharge"}

    def test_weight_length(self, engine):
        with pytest.raises(ValueError):
            rank_labels(engine, ["rivers"], weights=(1, 1, 1))

    def test_missing_label_model(self, engine, world):
        with pytest.raises(MissingModelError, match="phi3"):
            rank_labels(engine, engine.tokens(world.query), weights=(1, 0, 1, 0, 0))

    def test_label_model_inputs(self, engine, corpus, config, evidence):
        from tablegen import Engine
        m = RecordingModel()
        eng = Engine.build(corpus, config, ModelSet(label=m))
        feats = label_features(eng, ["rivers", "europe"], ["length", "album title"], [], evidence)
        assert m.calls == [(["rivers", "europe"], ["length"]), (["rivers", "europe"], ["album", "title"])]
        assert feats[:, 2].tolist() == [0.0, 0.0]

    def test_esc_feature_is_column_mean(self, engine, world, evidence):
        ents = world.relevant_entities[:3] + world.distractor_entities[:1]
        labels = ["length", "artist", "basin"]
        f = label_features(engine, ["rivers"], labels, ents, evidence, engine.config.label_weights)
        for j, s in enumerate(labels):
            assert f[j, 4] == pytest.approx(esc_label(engine, s, ents))


@settings(max_examples=50, deadline=None)
@given(st.lists(st.sampled_from(["length", "artist", "basin", "river", "song", "genre", "mouth"]),
                min_size=1, max_size=7, unique=True))
def test_entity_cp_bounded_by_column_population(engine_ev_world, labels):
    engine, ev, world = engine_ev_world
    cp = column_population(engine, ev, labels)
    ecp = entity_enhanced_cp(engine, ev, world.relevant_entities, labels)
    for s in labels:
        assert 0.0 <= ecp[s] <= cp.get(s, 0.0) + 1e-12


@pytest.fixture(scope="module")
def engine_ev_world(engine, evidence, world):
    return engine, evidence, world
