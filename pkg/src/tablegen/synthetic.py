"""Small synthetic corpora with known answers.

:func:`river_world` builds a corpus for the query ``"rivers europe"`` in
which:

* relevant entities are European rivers whose KB properties and core-column
  tables carry river headings (length, source, mouth, ...);
* distractor entities are songs whose descriptions repeat the query words,
  so a query-only LM ranking puts several of them above the rivers;
* song tables carry a disjoint heading set (artist, album, ...).

The ground-truth schema therefore separates rivers from songs, and the
ground-truth entity set separates river headings from song headings.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .corpus import Cell, Entity, RawTable, assemble_catchall

RIVER_LABELS = ("length", "source", "mouth", "country", "basin", "discharge")
SONG_LABELS = ("artist", "album", "released", "genre")

_RIVER_NAMES = ["Danube", "Rhine", "Elbe", "Loire", "Vistula", "Oder", "Tagus", "Ebro",
                "Seine", "Rhone", "Po", "Dnieper"]
_SONG_NAMES = ["Blue_Danube_Song", "River_Song", "Europa_Ballad", "Flow_Anthem", "Delta_Blues",
               "Bridge_Tune", "Water_Hymn", "Current_Pop", "Valley_Waltz", "Harbor_Rock"]
_COUNTRIES = ["Germany", "France", "Poland", "Spain", "Italy", "Austria", "Ukraine", "Portugal"]
_ARTISTS = ["Nova", "Echo", "Lumen", "Orbit", "Pulse"]
_GENRES = ["pop", "folk", "rock", "jazz"]


@dataclass
class SyntheticWorld:
    tables: list[RawTable]
    kb: dict[str, Entity]
    query: str
    relevant_entities: list[str]
    distractor_entities: list[str]
    entity_qrels: dict[str, int] = field(default_factory=dict)
    label_qrels: dict[str, int] = field(default_factory=dict)

    def write(self, directory: str | Path, qid: str = "q1") -> dict[str, Path]:
        """Write tables.jsonl, kb.jsonl, queries.tsv and the two qrels files."""
        d = Path(directory)
        d.mkdir(parents=True, exist_ok=True)
        paths = {name: d / f for name, f in (("tables", "tables.jsonl"), ("kb", "kb.jsonl"),
                                             ("queries", "queries.tsv"), ("entity_qrels", "entities.qrels"),
                                             ("label_qrels", "labels.qrels"))}
        with open(paths["tables"], "w", encoding="utf-8") as fh:
            for t in self.tables:
                fh.write(json.dumps(t.to_record(), sort_keys=True) + "\n")
        with open(paths["kb"], "w", encoding="utf-8") as fh:
            for e in self.kb.values():
                rec = {"id": e.id, "description": e.description, "properties": e.properties}
                fh.write(json.dumps(rec, sort_keys=True) + "\n")
        paths["queries"].write_text(f"{qid}\t{self.query}\n", encoding="utf-8")
        for key, qrels in (("entity_qrels", self.entity_qrels), ("label_qrels", self.label_qrels)):
            with open(paths[key], "w", encoding="utf-8") as fh:
                for item, rel in sorted(qrels.items()):
                    fh.write(f"{qid} 0 {item.replace(' ', '_')} {rel}\n")
        return paths


def _eid(name: str) -> str:
    return f"dbp:{name}"


def river_world(n_rivers: int = 8, n_songs: int = 8, seed: int = 0) -> SyntheticWorld:
    if not 2 <= n_rivers <= len(_RIVER_NAMES) or not 2 <= n_songs <= len(_SONG_NAMES):
        raise ValueError("unsupported world size")
    rng = np.random.default_rng(seed)
    kb: dict[str, Entity] = {}
    rivers, songs = [], []

    for i, name in enumerate(_RIVER_NAMES[:n_rivers]):
        country = str(rng.choice(_COUNTRIES))
        props = {
            "length": [f"{int(rng.integers(200, 3000))} km"],
            "source": [f"{name} springs"],
            "mouth": [f"{name} delta"],
            "country": [country],
            "basin": [f"{int(rng.integers(10, 900))}000 km2"],
            "discharge": [f"{int(rng.integers(100, 7000))} m3/s"],
        }
        desc = f"The {name} is a river in {country} in Europe."
        if i % 2 == 0:
            desc += f" It is one of the main rivers of central Europe and of {country}."
        kb[_eid(name)] = Entity(_eid(name), desc, props, assemble_catchall(desc, props))
        rivers.append(_eid(name))

    for i, name in enumerate(_SONG_NAMES[:n_songs]):
        title = name.replace("_", " ")
        props = {
            "artist": [str(rng.choice(_ARTISTS))],
            "album": [f"{title} album"],
            "released": [str(int(rng.integers(1960, 2020)))],
            "genre": [str(rng.choice(_GENRES))],
        }
        # query-word density falls off along the list, so only the first songs beat the rivers
        desc = f"{title} is a song" + " about rivers of Europe" * max(0, 3 - i) + \
            " recorded in a studio with a band and released as a single" * (i // 2)
        kb[_eid(name)] = Entity(_eid(name), desc, props, assemble_catchall(desc, props))
        songs.append(_eid(name))

    tables: list[RawTable] = []

    def entity_table(tid, caption, page, headings, members, label_keys):
        rows = []
        for e in members:
            row = [Cell("entity", e)]
            for key in label_keys:
                row.append(Cell("text", kb[e].properties[key][0]))
            rows.append(row)
        tables.append(RawTable(tid, caption, page, list(headings), rows))

    # river tables: several overlapping subsets, each with a subset of the river headings
    heading_sets = [("length", "source", "mouth"), ("country", "basin", "discharge"),
                    ("length", "country", "mouth"), ("source", "basin", "length")]
    river_captions = [("Rivers of Europe", "List of rivers of Europe"), ("Longest rivers", "Hydrology of Europe"),
                      ("Major drainage basins", "Continental hydrology"), ("River mouths", "Estuaries")]
    for i, keys in enumerate(heading_sets):
        members = [rivers[(i + j) % n_rivers] for j in range(max(2, n_rivers - 2))]
        caption, page = river_captions[i]
        entity_table(f"T-river-{i}", caption, page, ["River", *(k.capitalize() for k in keys)], members, keys)

    # song tables whose captions echo the query more strongly than the river tables do
    song_captions = [("Songs about rivers of Europe", "Rivers of Europe in popular music"),
                     ("Europe rivers songs", "Rivers Europe rivers chart")]
    for i, (caption, page) in enumerate(song_captions):
        members = songs[i:] + songs[:i]
        entity_table(f"T-song-{i}", caption, page, ["Song", "Artist", "Album", "Released", "Genre"],
                     members, SONG_LABELS)

    # non-relational noise: a text-only table and a one-row table
    tables.append(RawTable("T-text-0", "Europe travel notes", "Travel", ["Day", "Note"],
                           [[Cell("text", "1"), Cell("text", "boat trip on rivers")],
                            [Cell("text", "2"), Cell("text", "museum")]]))
    tables.append(RawTable("T-single-0", "Longest river", "Rivers", ["River", "Length"],
                           [[Cell("entity", rivers[0]), Cell("text", "2850 km")]]))

    return SyntheticWorld(
        tables=tables,
        kb=kb,
        query="rivers europe",
        relevant_entities=rivers,
        distractor_entities=songs,
        entity_qrels={e: 1 for e in rivers},
        label_qrels={label: 1 for label in ("river", *RIVER_LABELS)},
    )


def separable_pairs(n_queries: int = 50, seed: int = 0, vocab_size: int = 400) -> list[tuple[list[str], list[str], int]]:
    """Matcher training pairs where positives share two terms with the query and
    negatives are random; 4 pairs per query (2 positive, 2 negative)."""
    rng = np.random.default_rng(seed)
    vocab = [f"w{i}" for i in range(vocab_size)]
    pairs = []
    for _ in range(n_queries):
        q = [str(t) for t in rng.choice(vocab, 3, replace=False)]
        for _ in range(2):
            pos = [str(t) for t in rng.choice(q, 2, replace=False)] + [str(t) for t in rng.choice(vocab, 3)]
            neg = [str(t) for t in rng.choice(vocab, 5)]
            pairs.append((q, pos, 1))
            pairs.append((q, neg, -1))
    return pairs
