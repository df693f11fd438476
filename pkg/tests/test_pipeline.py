import json

import pytest

from tablegen.entity_ranking import rank_entities
from tablegen.pipeline import GenerationError, TableGenerator
from tablegen.schema_determination import rank_labels


@pytest.fixture(scope="module")
def gen(engine):
    return TableGenerator(engine)


@pytest.fixture(scope="module")
def three_rounds(gen, world):
    return gen.generate_table(world.query, rounds=3, k_feedback=5)


def test_round_zero_is_query_only(gen, engine, world):
    table = gen.generate_table(world.query, rounds=0)
    q = engine.tokens(world.query)
    assert table.entities == rank_entities(engine, q, []).ranking
    assert table.labels == rank_labels(engine, q, []).ranking
    assert table.rounds_executed == 0 and len(table.snapshots) == 1


def test_each_round_reads_only_the_previous_round(engine, world, three_rounds):
    q = engine.tokens(world.query)
    snaps = three_rounds.snapshots
    assert len(snaps) == 4
    for t in range(1, 4):
        prev = snaps[t - 1]
        want_e = rank_entities(engine, q, prev.labels.top(5)).ranking
        want_s = rank_labels(engine, q, prev.entities.top(5)).ranking
        assert snaps[t].entities == want_e
        assert snaps[t].labels == want_s


def test_replay_matches_stored_snapshots(gen, three_rounds):
    for t in range(4):
        snap = gen.replay_round(three_rounds, t, k_feedback=5)
        assert snap.entities == three_rounds.snapshots[t].entities
        assert snap.labels == three_rounds.snapshots[t].labels
    with pytest.raises(IndexError):
        gen.replay_round(three_rounds, 4)


def test_output_is_deterministic(gen, world):
    a = gen.generate_table(world.query, rounds=2).to_json()
    b = gen.generate_table(world.query, rounds=2).to_json()
    assert a == b


def test_output_shape_and_cells(gen, world, corpus):
    t = gen.generate_table(world.query, rounds=1, n_out=4, m_out=3)
    d = json.loads(t.to_json())
    assert len(d["entities"]) == 4 and len(d["schema"]) == 3
    assert len(t.values) == 4 and all(len(r) == 3 for r in t.values)
    for c in d["cells"]:
        assert 0 <= c["row"] < 4 and 0 <= c["col"] < 3
        assert c["provenance"]["source"] in ("kb", "table")
    tsv = t.to_tsv().splitlines()
    assert tsv[0] == f"# {world.query}"
    assert tsv[1].split()[0] == "entity" and len(tsv) == 6


def test_bad_settings(gen, world):
    with pytest.raises(ValueError):
        gen.generate_table(world.query, rounds=-1)
    with pytest.raises(ValueError):
        gen.generate_table(world.query, k_feedback=0)


def test_missing_model_surfaces_as_generation_error(gen, world):
    with pytest.raises(GenerationError, match="round 0"):
        gen.generate_table(world.query, rounds=0, entity_weights=(1, 1, 0, 0, 0, 0, 0))


class TestOracle:
    def test_requires_some_truth(self, gen, world):
        with pytest.raises(ValueError):
            gen.generate_table_oracle(world.query)

    def test_empty_truth(self, gen, world):
        with pytest.raises(ValueError):
            gen.generate_table_oracle(world.query, schema_truth=[])
        with pytest.raises(ValueError):
            gen.generate_table_oracle(world.query, entity_truth={"x": 0})

    def test_uses_truth_instead_of_feedback(self, gen, engine, world):
        t = gen.generate_table_oracle(world.query, schema_truth=world.label_qrels,
                                      entity_truth=world.entity_qrels, k_feedback=3)
        q = engine.tokens(world.query)
        truth_labels = sorted(world.label_qrels)[:3]
        truth_ents = sorted(world.entity_qrels)[:3]
        assert t.entities == rank_entities(engine, q, truth_labels).ranking
        assert t.labels == rank_labels(engine, q, truth_ents).ranking

    def test_perfect_on_the_river_world(self, gen, world):
        t = gen.generate_table_oracle(world.query, schema_truth=world.label_qrels, entity_truth=world.entity_qrels)
        n, m = len(world.entity_qrels), len(world.label_qrels)
        assert set(t.entities.items[:n]) == set(world.entity_qrels)
        assert set(t.labels.items[:m]) == set(world.label_qrels)


def test_tsv_rows_have_one_field_per_column(gen, world):
    lines = gen.generate_table(world.query, rounds=1, n_out=10, m_out=4).to_tsv().splitlines()[1:]
    assert len(lines) == 11 and {line.count("\t") for line in lines} == {4}
