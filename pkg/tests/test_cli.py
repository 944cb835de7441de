import io
import json

import numpy as np
import pytest

from dendrite.cli import config_hash, run, validate_config
from dendrite.trees import MetricTree, OrderedTree, load_tree, save_tree


def call(argv):
    out, err = io.StringIO(), io.StringIO()
    code = run(argv, out, err)
    return code, out.getvalue(), err.getvalue()


def written(out):
    return [line.split(" ", 1)[1].split(":")[0] for line in out.splitlines() if line.startswith("wrote ")]


class TestValidate:
    def test_empty_generate(self):
        keys = {k for k, _ in validate_config({}, "generate-tree")}
        assert keys == {"offspring", "n", "seed"}

    def test_empty_converge(self):
        keys = {k for k, _ in validate_config({}, "converge")}
        assert {"mode", "seed", "replicas"} <= keys

    def test_alpha_range(self):
        errs = validate_config({"offspring": "stable-tail", "alpha": 2.5, "n": 10, "seed": 1}, "generate-tree")
        assert [k for k, _ in errs] == ["alpha"]

    def test_mesh_error(self):
        errs = validate_config({"tree": "star:1,2", "h": 1.5, "seed": 1}, "bm")
        assert [k for k, _ in errs] == ["h"]

    def test_unknown_and_type(self):
        errs = dict(validate_config({"offspring": "poisson-1", "n": "ten", "seed": 1, "colour": 3}, "generate-tree"))
        assert errs["colour"] == "unknown key"
        assert "n" in errs

    def test_walk_needs_one_source(self, tmp_path):
        p = tmp_path / "t.tree"
        save_tree(OrderedTree.path(4), p)
        errs = validate_config({"tree": str(p), "offspring": "poisson-1", "n": 5, "steps": 3, "seed": 1}, "walk")
        assert [k for k, _ in errs] == ["tree"]

    def test_hash_ignores_output_dir(self):
        assert config_hash({"seed": 1, "output-dir": "a"}) == config_hash({"seed": 1, "output-dir": "b"})
        assert config_hash({"seed": 1}) != config_hash({"seed": 2})


class TestRun:
    def test_generate_tree(self, tmp_path):
        code, out, _ = call(["generate-tree", "--offspring", "geometric-half", "--n", "1000", "--seed", "7",
                             "--output-dir", str(tmp_path)])
        assert code == 0
        paths = written(out)
        assert [p.rsplit(".", 1)[-1] for p in paths] == ["tree", "json"]
        tree = load_tree(paths[0])
        assert isinstance(tree, OrderedTree) and tree.n == 1000
        meta = json.loads(open(paths[1]).read())
        assert meta["seed"] == 7
        assert paths[0].endswith(f"generate-tree-{meta['config-hash']}-7.tree")
        assert f"config-hash={meta['config-hash']} seed=7" in open(paths[0]).readline()

    def test_flags_override_config(self, tmp_path):
        cfg = tmp_path / "c.json"
        cfg.write_text(json.dumps({"offspring": "poisson-1", "n": 50, "seed": 1}))
        code, out, _ = call(["generate-tree", "--config", str(cfg), "--n", "20", "--output-dir", str(tmp_path)])
        assert code == 0
        assert load_tree(written(out)[0]).n == 20

    def test_bad_config_exit_2(self, tmp_path):
        code, out, err = call(["generate-tree", "--offspring", "stable-tail", "--alpha", "2.5", "--n", "10",
                               "--seed", "1", "--output-dir", str(tmp_path)])
        assert code == 2
        assert "alpha" in err
        assert out == ""
        assert not list(tmp_path.iterdir())

    def test_missing_seed(self, tmp_path):
        code, _, err = call(["bm", "--tree", "star:1,1,1", "--output-dir", str(tmp_path)])
        assert code == 2 and "seed" in err

    def test_runtime_failure_exit_1(self, tmp_path):
        p = tmp_path / "single.tree"
        save_tree(OrderedTree([[]]), p)
        code, _, err = call(["walk", "--tree", str(p), "--steps", "3", "--seed", "1", "--output-dir", str(tmp_path)])
        assert code == 1 and err.startswith("error:")

    def test_search_depth_and_embed(self, tmp_path):
        p = tmp_path / "t.tree"
        save_tree(OrderedTree([[1, 2], [], []]), p)
        code, out, _ = call(["search-depth", "--tree", str(p), "--output-dir", str(tmp_path)])
        assert code == 0
        lines = open(written(out)[0]).read().splitlines()
        assert lines[0].startswith("# config-hash=") and lines[1] == "t,value"
        code, out, _ = call(["embed", "--tree", "star:1,2,3", "--output-dir", str(tmp_path)])
        assert code == 0
        assert open(written(out)[0]).read().splitlines()[1] == "point-id,coord-1,coord-2,coord-3"

    def test_walk_u32(self, tmp_path):
        p = tmp_path / "t.tree"
        save_tree(OrderedTree.path(5), p)
        code, out, _ = call(["walk", "--tree", str(p), "--steps", "100", "--seed", "2", "--k", "2",
                             "--output-dir", str(tmp_path)])
        assert code == 0
        paths = written(out)
        x = np.frombuffer(open(paths[0], "rb").read(), dtype="<u4")
        assert x.size == 101 and x[0] == 0
        assert np.all(np.abs(np.diff(x.astype(int))) == 1)

    def test_bm_check_oracles(self, tmp_path):
        code, out, _ = call(["bm", "--tree", "star:1,1,1", "--check-oracles", "--seed", "1", "--h", "0.05",
                             "--replicas", "2000", "--output-dir", str(tmp_path)])
        assert code == 0
        rows = open(written(out)[0]).read().splitlines()[2:]
        assert all(r.endswith(",true") for r in rows)

    def test_bm_path(self, tmp_path):
        code, out, _ = call(["bm", "--tree", "segment:1", "--h", "0.1", "--t-end", "0.2", "--seed", "3",
                             "--output-dir", str(tmp_path)])
        assert code == 0
        assert open(written(out)[0]).read().splitlines()[1] == "clock,edge,offset"

    def test_volume_profile_fixed(self, tmp_path):
        code, out, _ = call(["volume-profile", "--tree", "segment:1", "--radii", "0.05,0.1,0.2,0.5",
                             "--output-dir", str(tmp_path)])
        assert code == 0
        meta = json.loads(open(written(out)[1]).read())
        assert meta["summary"]["inf-volumes"] == pytest.approx([0.05, 0.1, 0.2, 0.5])
        assert meta["summary"]["fit"]["slope"] == pytest.approx(1.0)

    def test_converge_is_byte_identical(self, tmp_path):
        cfg = tmp_path / "c.json"
        cfg.write_text(json.dumps({"mode": "fixed-tree", "seed": 5, "replicas": 200, "tree": "star:1,1,1",
                                   "scales": [10, 20]}))
        outs = []
        for d in ("a", "b"):
            code, out, _ = call(["converge", "--config", str(cfg), "--output-dir", str(tmp_path / d)])
            assert code == 0
            # metadata echoes the output directory; the report and samples must match
            outs.append([open(p, "rb").read() for p in written(out)[:2]])
        assert outs[0] == outs[1]
        report = json.loads(outs[0][0])
        assert report["report-version"] == 1 and report["seed"] == 5
