import json

import pytest

from ghlab import ConfigError, EndKind, SweepRecord, parse_config
from ghlab.cli import emit, main, parse_csv, records_to_csv

MINIMAL = """
[end]
kind = ALF
k = 2
rho_max = 5.0
"""


class TestParseConfig:
    def test_minimal_with_defaults(self):
        cfg = parse_config(MINIMAL)
        assert cfg.kind is EndKind.ALF
        assert cfg.k == 2
        assert cfg.rho_max == 5.0
        assert cfg.eps == 0.5  # default filled
        assert cfg.name == "all"
        cfg.model_end()

    def test_eps_out_of_range(self):
        with pytest.raises(ConfigError, match=r"\(0,1\)"):
            parse_config(MINIMAL + "eps = 1.5\n")

    def test_alh_needs_positive_rho_min(self):
        text = "[end]\nkind = ALH\nrho_min = 0.0\n"
        with pytest.raises(ConfigError, match="rho_min"):
            parse_config(text)

    def test_unknown_key_rejected(self):
        with pytest.raises(ConfigError, match="unknown key"):
            parse_config(MINIMAL + "banana = 1\n")

    def test_unknown_section_rejected(self):
        with pytest.raises(ConfigError, match="unknown section"):
            parse_config("[nope]\nx = 1\n")

    def test_parse_error_carries_line(self):
        with pytest.raises(ConfigError, match="line"):
            parse_config("[end]\nkind ALF\n")

    def test_experiment_options(self):
        text = MINIMAL + ("[experiment]\nname = indicial\n"
                          "n_list = 0, 1, -1\nseed = 3\n")
        cfg = parse_config(text)
        assert cfg.name == "indicial"
        assert cfg.n_list == (0, 1, -1)
        assert cfg.seed == 3

    def test_bad_experiment_name(self):
        with pytest.raises(ConfigError, match="unknown experiment"):
            parse_config(MINIMAL + "[experiment]\nname = frobnicate\n")


def sample_records():
    return [
        SweepRecord(experiment="poincare", kind="ALH", c=1.0, k=0, eps=0.5,
                    max_ratio_excess=0.97, tolerance=1.01, verdict="pass",
                    seed=0, note="sample=0"),
        SweepRecord(experiment="poincare", kind="ALH", c=1.0, k=0, eps=0.25,
                    max_ratio_excess=1.5, tolerance=1.01, verdict="fail",
                    seed=1, note="sample=1"),
    ]


class TestEmit:
    def test_single_record_csv(self, tmp_path):
        emit(sample_records()[:1], tmp_path / "r.csv", tmp_path / "r.json")
        lines = (tmp_path / "r.csv").read_text().splitlines()
        assert len(lines) == 2  # header + one row
        assert lines[0].startswith("experiment,kind,c,k,eps")

    def test_fail_count(self, tmp_path):
        emit(sample_records(), tmp_path / "r.csv", tmp_path / "r.json")
        summary = json.loads((tmp_path / "r.json").read_text())
        assert summary["pass_count"] == 1
        assert summary["fail_count"] == 1
        assert summary["worst_case"]["verdict"] == "fail"

    def test_reemit_byte_identical(self, tmp_path):
        emit(sample_records(), tmp_path / "a.csv", tmp_path / "a.json")
        first = ((tmp_path / "a.csv").read_bytes(),
                 (tmp_path / "a.json").read_bytes())
        emit(sample_records(), tmp_path / "a.csv", tmp_path / "a.json")
        second = ((tmp_path / "a.csv").read_bytes(),
                  (tmp_path / "a.json").read_bytes())
        assert first == second

    def test_round_trip_exact(self):
        recs = [SweepRecord(experiment="x", kind="ALF", c=1.0, k=2, eps=0.5,
                            sigma_min=0.1 + 1e-17, residual=1.0 / 3.0,
                            drift=2.0 ** -40, tolerance=3.0, verdict="pass")]
        back = parse_csv(records_to_csv(recs))
        assert back[0].sigma_min == recs[0].sigma_min
        assert back[0].residual == recs[0].residual
        assert back[0].drift == recs[0].drift
        assert back[0].kernel_dim is None

    def test_empty_rejected(self, tmp_path):
        with pytest.raises(ValueError):
            emit([], tmp_path / "r.csv", tmp_path / "r.json")


class TestMain:
    def test_commutator_quick(self, tmp_path):
        code = main(["commutator", "--quick", "--out", str(tmp_path)])
        assert code == 0
        assert (tmp_path / "commutator.csv").exists()
        assert (tmp_path / "commutator.json").exists()

    def test_config_file(self, tmp_path):
        cfgfile = tmp_path / "run.cfg"
        cfgfile.write_text(MINIMAL + "[output]\ndir = " + str(tmp_path) + "\n")
        code = main(["geometry-check", "--quick", "--config", str(cfgfile)])
        assert code == 0
        assert (tmp_path / "geometry_check.csv").exists()

    def test_bad_config_exit_code(self, tmp_path):
        cfgfile = tmp_path / "bad.cfg"
        cfgfile.write_text("[end]\neps = 2.0\n")
        assert main(["commutator", "--config", str(cfgfile)]) == 3

    def test_seed_override_printed(self, tmp_path, capsys):
        main(["commutator", "--quick", "--seed", "9", "--out", str(tmp_path)])
        out = capsys.readouterr().out
        assert "seed = 9" in out
