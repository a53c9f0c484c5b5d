import json

import pytest

from nbsopt.cli import main


def run(argv):
    return main(argv)


@pytest.fixture
def tiny_instance_path(tmp_path):
    path = tmp_path / "inst.json"
    code = run([
        "gen", "--seed", "1", "--size", "xs", "--out", str(path),
        "--nbs", "1", "--measures", "1",
        "--forbidden-frac", "0.998", "--pre-frac", "0.001",
    ])
    assert code == 0
    return path


class TestGen:
    def test_deterministic_bytes(self, tmp_path):
        p1, p2 = tmp_path / "a.json", tmp_path / "b.json"
        for path in (p1, p2):
            assert run(["gen", "--seed", "9", "--size", "xs", "--out", str(path),
                        "--nbs", "2", "--measures", "2"]) == 0
        assert p1.read_bytes() == p2.read_bytes()

    def test_size_m_is_200_by_200(self, tmp_path):
        path = tmp_path / "m.json"
        assert run(["gen", "--seed", "0", "--size", "m", "--out", str(path),
                    "--nbs", "1", "--measures", "1"]) == 0
        raw = json.loads(path.read_text())
        assert raw["dims"]["width"] == 200 and raw["dims"]["height"] == 200

    def test_unknown_flag_rejected(self, tmp_path):
        with pytest.raises(SystemExit) as exc:
            run(["gen", "--seed", "1", "--size", "xs", "--out",
                 str(tmp_path / "x.json"), "--bogus"])
        assert exc.value.code == 2


class TestValidate:
    def test_valid_instance(self, tiny_instance_path, capsys):
        assert run(["validate", str(tiny_instance_path)]) == 0
        assert "ok:" in capsys.readouterr().out

    def test_corrupt_file_exits_2_naming_field(self, tmp_path, capsys):
        bad = tmp_path / "bad.json"
        bad.write_text('{"dims": {"width": 1}}')
        assert run(["validate", str(bad)]) == 2
        err = capsys.readouterr().err
        assert "error code=instance.schema" in err
        assert "dims" in err

    def test_missing_file_exits_4(self, tmp_path):
        assert run(["validate", str(tmp_path / "nope.json")]) == 4


class TestKernelsCommand:
    def test_lists_all_default_kernels(self, capsys):
        assert run(["kernels"]) == 0
        out = capsys.readouterr().out
        assert "11x11" in out  # urban park fairness kernel
        assert out.count("Fairness") == 4


class TestSolveAndReport:
    def test_oracle_end_to_end(self, tiny_instance_path, tmp_path, capsys):
        result_path = tmp_path / "result.json"
        code = run(["solve", str(tiny_instance_path), "--backend", "oracle",
                    "--out", str(result_path)])
        assert code == 0
        assert "status=optimal" in capsys.readouterr().out
        raw = json.loads(result_path.read_text())
        assert raw["status"] == "optimal"
        assert raw["new_cells"] is not None

        out_dir = tmp_path / "rep"
        code = run(["report", str(tiny_instance_path), str(result_path),
                    "--out-dir", str(out_dir)])
        assert code == 0
        assert (out_dir / "report.json").exists()
        assert (out_dir / "placement_GW.pgm").exists()
        assert (out_dir / "heatmap_scales.json").exists()

    def test_result_json_deterministic_modulo_metadata(self, tiny_instance_path, tmp_path):
        paths = [tmp_path / "r1.json", tmp_path / "r2.json"]
        for p in paths:
            assert run(["solve", str(tiny_instance_path), "--backend", "oracle",
                        "--out", str(p)]) == 0
        r1, r2 = (json.loads(p.read_text()) for p in paths)
        r1.pop("metadata"), r2.pop("metadata")
        assert r1 == r2

    def test_oracle_cap_exceeded_exits_3(self, tmp_path, capsys):
        inst = tmp_path / "big.json"
        assert run(["gen", "--seed", "2", "--size", "xs", "--out", str(inst),
                    "--nbs", "2", "--measures", "1", "--forbidden-frac", "0.5"]) == 0
        assert run(["solve", str(inst), "--backend", "oracle"]) == 3
        assert "solve.cap" in capsys.readouterr().err

    def test_external_backend_with_workdir(self, tiny_instance_path, tmp_path):
        code = run(["solve", str(tiny_instance_path), "--backend", "external",
                    "--timelimit", "60", "--workdir", str(tmp_path / "w"),
                    "--out", str(tmp_path / "r.json")])
        assert code == 0
        assert (tmp_path / "w" / "model.mps").exists()


class TestBuild:
    def test_writes_mps(self, tiny_instance_path, tmp_path, capsys):
        out = tmp_path / "model.mps"
        assert run(["build", str(tiny_instance_path), "--out", str(out)]) == 0
        assert out.exists()
        head = out.read_text().splitlines()[0]
        assert head.startswith("NAME")
        assert "columns" in capsys.readouterr().out


class TestBench:
    def test_small_oracle_bench(self, tmp_path, capsys):
        out_dir = tmp_path / "bench"
        code = run(["bench", "--seeds", "2", "--backend", "oracle",
                    "--out-dir", str(out_dir)])
        assert code == 0
        stats = json.loads((out_dir / "stats.json").read_text())
        assert stats["count"] == 2
        assert stats["pct_optimal"] == 100.0
        seed_dirs = sorted(p.name for p in out_dir.iterdir() if p.is_dir())
        assert len(seed_dirs) == 2
        for d in seed_dirs:
            assert (out_dir / d / "instance.json").exists()
            assert (out_dir / d / "report.json").exists()

    def test_parallel_jobs_match_serial(self, tmp_path):
        serial, parallel = tmp_path / "s", tmp_path / "p"
        assert run(["bench", "--seeds", "2", "--backend", "oracle",
                    "--out-dir", str(serial)]) == 0
        assert run(["bench", "--seeds", "2", "--backend", "oracle", "--jobs", "2",
                    "--out-dir", str(parallel)]) == 0
        s = json.loads((serial / "stats.json").read_text())
        p = json.loads((parallel / "stats.json").read_text())
        s.pop("mean_wall_time"), p.pop("mean_wall_time")
        assert s == p


class TestConfigFile:
    def test_config_supplies_defaults_flags_win(self, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"forbidden_frac": 0.998, "nbs": 1, "measures": 1,
                                   "pre_frac": 0.001}))
        out_cfg = tmp_path / "a.json"
        assert run(["gen", "--seed", "1", "--size", "xs", "--out", str(out_cfg),
                    "--config", str(cfg)]) == 0
        out_flags = tmp_path / "b.json"
        assert run(["gen", "--seed", "1", "--size", "xs", "--out", str(out_flags),
                    "--nbs", "1", "--measures", "1",
                    "--forbidden-frac", "0.998", "--pre-frac", "0.001"]) == 0
        assert out_cfg.read_bytes() == out_flags.read_bytes()

        # an explicit flag overrides the config value
        out_override = tmp_path / "c.json"
        assert run(["gen", "--seed", "1", "--size", "xs", "--out", str(out_override),
                    "--config", str(cfg), "--nbs", "2"]) == 0
        raw = json.loads(out_override.read_text())
        assert len(raw["nbs"]) == 2
