"""Show how cell values are chosen and traced back to their source.

Two stadium tables disagree with each other and with the knowledge base.
A KB fact always wins; when only tables hold a value, the table that the
query retrieves with the higher BM25 score wins. Every returned value can be
re-read from the source named in its provenance.

Run: python3 demos/value_provenance.py
"""

from tablegen import Config, Corpus, Engine
from tablegen.corpus import Cell, Entity, RawTable
from tablegen.value_lookup import fill_values, refetch


def row(eid, *values):
    return [Cell("entity", eid), *(Cell("text", v) for v in values)]


kb = {
    "Croke_Park": Entity("Croke_Park", "Croke Park is a stadium in Dublin", {"capacity": ["82300"]}),
    "Thomond_Park": Entity("Thomond_Park", "Thomond Park is a stadium in Limerick", {}),
}
tables = [
    RawTable("T-big", "Largest stadiums in Ireland", "Stadiums", ["Stadium", "Capacity", "City"],
             [row("Croke_Park", "82000", "Dublin"), row("Thomond_Park", "25600", "Limerick")]),
    RawTable("T-old", "Old grounds", "Stadiums of Ireland history", ["Ground", "Capacity"],
             [row("Croke_Park", "40000"), row("Thomond_Park", "12000")]),
]
engine = Engine.build(Corpus.ingest(tables, kb), Config())
relevance = engine.table_evidence(engine.tokens("stadiums ireland")).bm25_all
print("table relevance:", {t: round(s, 3) for t, s in relevance.items()}, "\n")

labels = ["capacity", "city"]
grid = fill_values(list(kb), labels, engine.catalog, engine.matcher, relevance)
for eid, cells in zip(kb, grid):
    for label, fact in zip(labels, cells):
        if fact is None:
            print(f"{eid:13} {label:9} (empty)")
            continue
        src = fact.provenance.describe()
        ok = refetch(engine.corpus, fact) == fact.value
        print(f"{eid:13} {label:9} {fact.value:9} from {src:14} re-fetch ok: {ok}")
