import io

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from tablegen.corpus import Entity
from tablegen.schema_norm import (
    LabelMatcher, SynonymSets, build_synonym_sets, cooccurrence_counts, edit_similarity, labels_match,
    levenshtein, read_overrides,
)


def test_similarity_examples():
    assert edit_similarity("Nation", "nation") == 1.0
    assert edit_similarity("birthday", "birth day") == pytest.approx(1 - 1 / 9)
    assert edit_similarity("birthday", "birth day") == pytest.approx(oracles.similarity("birthday", "birth day"))
    assert edit_similarity("abc", "xyz") == 0.0
    assert edit_similarity("", "the") == 1.0


def test_labels_match_examples():
    syn = SynonymSets.from_groups([{"country", "nation"}])
    assert edit_similarity("nation", "country") < 0.8
    assert labels_match("nation", "country", 0.8, syn)
    assert labels_match("Population", "population", 0.8)
    assert not labels_match("population", "mayor", 0.8)
    with pytest.raises(ValueError):
        labels_match("a", "b", 1.5)


def kb_with(pairs):
    """Entities where each (label_a, label_b, n) shares n identical values."""
    kb = {}
    i = 0
    for a, b, n in pairs:
        for _ in range(n):
            kb[f"e{i}"] = Entity(f"e{i}", "", {a: [f"v{i}"], b: [f"v{i}"]})
            i += 1
    return kb


def test_synonyms_from_cooccurrence():
    kb = kb_with([("nation", "country", 5), ("born", "birth place", 2)])
    syn = build_synonym_sets(kb, threshold=3)
    assert syn.canon("nation") == syn.canon("country") == "country"
    assert syn.canon("born") == "born" and syn.canon("birth place") == "birth place"


def test_cooccurrence_counts_match_brute_force():
    kb = kb_with([("p", "q", 4), ("q", "r", 3), ("p", "r", 1)])
    counts = cooccurrence_counts(kb)
    for x, y in [("p", "q"), ("q", "r"), ("p", "r")]:
        brute = sum(1 for e in kb.values() for v in set(sum(e.properties.values(), []))
                    if v in e.properties.get(x, []) and v in e.properties.get(y, []))
        assert counts[(x, y)] == brute


def test_transitive_closure_and_overrides():
    kb = kb_with([("p", "q", 3), ("q", "r", 3)])
    assert build_synonym_sets(kb).groups == [frozenset({"p", "q", "r"})]
    denied = build_synonym_sets(kb, overrides=[("deny", "p", "r")])
    assert denied.canon("p") != denied.canon("r")
    allowed = build_synonym_sets(kb_with([]), overrides=[("allow", "Nation", "country")])
    assert allowed.canon("nation") == allowed.canon("country")


def test_read_overrides():
    src = io.StringIO("# comment\nallow\tnation\tcountry\ndeny\ta\tb\n")
    assert read_overrides(src) == [("allow", "nation", "country"), ("deny", "a", "b")]
    with pytest.raises(ValueError):
        read_overrides(io.StringIO("maybe\ta\tb\n"))


def test_synonyms_json_round_trip():
    syn = SynonymSets.from_groups([{"b", "a"}, {"x", "y", "z"}])
    back = SynonymSets.from_json(syn.to_json())
    assert back.groups == syn.groups and back.canonical == syn.canonical


def test_threshold_match_is_not_transitive():
    # sim(bcdef, bcdex) = 0.8 and sim(bcdex, bcdxx) = 0.8 but sim(bcdef, bcdxx) = 0.6
    m = LabelMatcher(delta=0.8)
    assert m.match("bcdef", "bcdex") and m.match("bcdex", "bcdxx")
    assert not m.match("bcdef", "bcdxx")


def test_best_match_prefers_highest_similarity():
    m = LabelMatcher(delta=0.8)
    assert m.best_match("length", ["Length (km)", "Lengths", "Length"]) == 2
    assert m.best_match("mayor", ["length", "source"]) is None


labels = st.text(alphabet="abcde -", max_size=8)


@settings(max_examples=300, deadline=None)
@given(labels, labels)
def test_similarity_properties(a, b):
    s = edit_similarity(a, b)
    assert 0.0 <= s <= 1.0
    assert s == edit_similarity(b, a)
    assert (s == 1.0) == (oracles.norm_label(a) == oracles.norm_label(b))
    assert s == pytest.approx(oracles.similarity(a, b), abs=1e-12)


@settings(max_examples=300, deadline=None)
@given(st.text("abc", max_size=7), st.text("abc", max_size=7))
def test_levenshtein_matches_recursive_oracle(a, b):
    assert levenshtein(a, b) == oracles.levenshtein(a, b)


@settings(max_examples=200, deadline=None)
@given(labels, labels)
def test_match_reflexive_symmetric(a, b):
    syn = SynonymSets.from_groups([{"ab", "cd"}])
    assert labels_match(a, a, 0.8, syn)
    assert labels_match(a, b, 0.8, syn) == labels_match(b, a, 0.8, syn)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.tuples(st.sampled_from("pqrstu"), st.sampled_from("pqrstu"), st.integers(0, 5)), max_size=6))
def test_synonym_groups_disjoint_and_canonical_idempotent(pairs):
    syn = build_synonym_sets(kb_with([(a, b, n) for a, b, n in pairs if a != b]))
    seen = set()
    for g in syn.groups:
        assert not (g & seen)
        seen |= g
        assert {syn.canon(x) for x in g} == {min(g)}
    for x in "pqrstu":
        assert syn.canon(syn.canon(x)) == syn.canon(x)
