"""Keyword-query table generation over a web-table corpus and a knowledge base.

Typical use::

    from tablegen import Corpus, Engine, TableGenerator

    corpus = Corpus.from_files("tables.jsonl", "kb.jsonl")
    engine = Engine.build(corpus)
    table = TableGenerator(engine).generate_table("rivers of europe", rounds=3)
    print(table.to_tsv())
"""

__version__ = "0.1.0"

from .config import Config, load_config
from .corpus import Cell, Corpus, Entity, RawTable, RelationalTable, classify_relational, detect_core_column
from .engine import Engine, ModelSet, MissingModelError
from .pipeline import GeneratedTable, GenerationError, TableGenerator
from .semantic_match import DrrmTksModel, EmbeddingTable, train

__all__ = [
    "Cell", "Config", "Corpus", "DrrmTksModel", "EmbeddingTable", "Engine", "Entity", "GeneratedTable",
    "GenerationError", "MissingModelError", "ModelSet", "RawTable", "RelationalTable", "TableGenerator",
    "classify_relational", "detect_core_column", "load_config", "train",
]
