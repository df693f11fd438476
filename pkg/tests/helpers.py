from tablegen import Config, Corpus, Engine
from tablegen.corpus import Cell, Entity, RawTable
from tablegen.engine import ModelSet


def table(tid, headings, rows, caption="", page=""):
    """Rows are lists of strings; a leading '@' marks an entity link."""
    grid = [[Cell("entity", v[1:]) if v.startswith("@") else Cell("text", v) for v in r] for r in rows]
    return RawTable(tid, caption, page, list(headings), grid)


def entity(eid, description="", **props):
    return Entity(eid, description, {k.replace("_", " "): list(v) for k, v in props.items()})


def make_engine(tables, entities, models=None, hits=None, overrides=(), **config):
    kb = {e.id: e for e in entities}
    cfg = Config(**{"entity_weights": (1, 0, 0, 0, 0, 0, 1), "label_weights": (1, 1, 0, 1, 1), **config})
    return Engine.build(Corpus.ingest(tables, kb), cfg, models or ModelSet(), overrides, hits)


class RecordingModel:
    """Stand-in matcher: scores by token overlap and remembers every call."""

    def __init__(self):
        self.calls = []

    def score(self, a, b):
        self.calls.append((list(a), list(b)))
        return float(len(set(a) & set(b)))
