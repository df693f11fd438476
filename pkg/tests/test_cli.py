import json

import pytest

from tablegen.cli import EXIT_CORRUPT, EXIT_EMPTY, EXIT_OK, EXIT_USAGE, main
from tablegen.synthetic import river_world


@pytest.fixture(scope="module")
def files(tmp_path_factory):
    d = tmp_path_factory.mktemp("world")
    paths = river_world().write(d)
    paths["queries"].write_text("q1\trivers europe\nq2\tsongs about rivers\nq3\tlongest rivers\n", encoding="utf-8")
    return paths


@pytest.fixture(scope="module")
def bundle(files, tmp_path_factory):
    out = tmp_path_factory.mktemp("bundle")
    assert main(["build", "--tables", str(files["tables"]), "--kb", str(files["kb"]), "--out", str(out)]) == EXIT_OK
    return out


def test_build_writes_manifest(bundle):
    m = json.loads((bundle / "manifest.json").read_text())
    assert len(m["artifacts"]) == 4
    for a in m["artifacts"]:
        assert (bundle / a["file"]).exists() and len(a["sha256"]) == 64
    assert m["stats"]["relational_tables"] == 6 and m["stats"]["non_relational_tables"] == 2


def test_build_is_reproducible(files, bundle, tmp_path):
    assert main(["build", "--tables", str(files["tables"]), "--kb", str(files["kb"]), "--out", str(tmp_path)]) == 0
    for f in sorted(p.name for p in bundle.iterdir() if p.is_file()):
        assert (bundle / f).read_bytes() == (tmp_path / f).read_bytes(), f


def test_missing_kb(files, tmp_path, capsys):
    code = main(["build", "--tables", str(files["tables"]), "--kb", str(tmp_path / "nope.jsonl"),
                 "--out", str(tmp_path / "b")])
    assert code == EXIT_USAGE
    assert "nope.jsonl" in capsys.readouterr().err


def test_corrupt_bundle(bundle, tmp_path, capsys):
    import shutil
    broken = tmp_path / "b"
    shutil.copytree(bundle, broken)
    with open(broken / "catalog.jsonl", "a") as fh:
        fh.write("tampered\n")
    assert main(["generate", str(broken), "rivers europe"]) == EXIT_CORRUPT
    assert "catalog.jsonl" in capsys.readouterr().err


def test_generate_single_query(bundle, capsys):
    assert main(["generate", str(bundle), "rivers europe", "--rounds", "2", "--n-out", "4", "--m-out", "3"]) == 0
    rec = json.loads(capsys.readouterr().out)
    assert rec["query"] == "rivers europe" and rec["rounds"] == 2
    assert len(rec["entities"]) == 4 and len(rec["schema"]) == 3


def test_generate_batch_and_runs(bundle, files, tmp_path, capsys):
    erun, lrun = tmp_path / "e.run", tmp_path / "l.run"
    code = main(["generate", str(bundle), "--queries", str(files["queries"]), "--threads", "2",
                 "--entity-run", str(erun), "--label-run", str(lrun)])
    assert code == EXIT_OK
    lines = capsys.readouterr().out.splitlines()
    assert [json.loads(x)["qid"] for x in lines] == ["q1", "q2", "q3"]
    for run in (erun, lrun):
        assert {line.split()[0] for line in run.read_text().splitlines()} == {"q1", "q2", "q3"}
        assert all(len(line.split()) == 6 for line in run.read_text().splitlines())


def test_generate_tsv(bundle, capsys):
    assert main(["generate", str(bundle), "rivers europe", "--format", "tsv", "--rounds", "0"]) == 0
    out = capsys.readouterr().out.splitlines()
    assert out[0] == "# rivers europe" and out[1].startswith("entity")


def test_generate_needs_a_query(bundle, capsys):
    assert main(["generate", str(bundle)]) == EXIT_USAGE


def test_eval(bundle, files, tmp_path, capsys):
    erun = tmp_path / "e.run"
    main(["generate", str(bundle), "--queries", str(files["queries"]), "--entity-run", str(erun)])
    capsys.readouterr()
    assert main(["eval", "--run", str(erun), "--qrels", str(files["entity_qrels"]), "--format", "json"]) == 0
    payload = json.loads(capsys.readouterr().out)
    assert set(payload["mean"]) == {"ndcg@5", "ndcg@10", "map", "mrr"}
    assert payload["per_query"]["q1"]["ndcg@10"] == pytest.approx(1.0)
    assert main(["eval", "--run", str(erun), "--qrels", str(files["entity_qrels"]), "--metrics", "p@5"]) == EXIT_USAGE


def test_train_writes_model_and_loss(files, tmp_path, bundle, capsys):
    model, loss = tmp_path / "m.npz", tmp_path / "loss.csv"
    code = main(["train", "--tables", str(files["tables"]), "--kb", str(files["kb"]), "--task", "schema-matcher",
                 "--out", str(model), "--loss-csv", str(loss), "--epochs", "3"])
    assert code == EXIT_OK
    rows = loss.read_text().splitlines()
    assert rows[0] == "epoch,loss" and len(rows) == 4
    assert main(["generate", str(bundle), "rivers europe", "--label-model", str(model)]) == EXIT_OK


def test_train_without_pairs(files, tmp_path):
    empty = tmp_path / "tables.jsonl"
    empty.write_text("")
    code = main(["train", "--tables", str(empty), "--kb", str(files["kb"]), "--task", "schema-matcher",
                 "--out", str(tmp_path / "m.npz"), "--epochs", "1"])
    assert code == EXIT_EMPTY


def test_version(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["--version"])
    assert exc.value.code == 0
    assert "0.1.0" in capsys.readouterr().out
