import json

import pytest

from src.cli import main
from src.config import RunConfig, load_config, parse_int_list, parse_span
from src.constants import N_PERMUTATIONS, PLOTS_DIR, RESULTS_FILE
from src.errors import ConfigError


class TestConfig:
    def test_defaults(self):
        config = load_config()
        assert config.nperm == N_PERMUTATIONS
        assert config.span == (1977, 2010)
        assert config.periods == (26,)
        assert config.lags == (1, 2)
        assert config.fdr_scope == "pooled"

    def test_file_then_flags(self, tmp_path):
        path = tmp_path / "run.json"
        path.write_text(json.dumps({"nperm": 500, "q": 0.05, "span": "1990:1999", "lags": [1]}))
        config = load_config(path, {"nperm": 200, "q": None})
        assert config.nperm == 200
        assert config.q == 0.05
        assert config.span == (1990, 1999)
        assert config.lags == (1,)

    def test_unknown_key(self, tmp_path):
        path = tmp_path / "run.json"
        path.write_text(json.dumps({"permutations": 5}))
        with pytest.raises(ConfigError):
            load_config(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError):
            load_config(tmp_path / "absent.json")

    @pytest.mark.parametrize("overrides", [
        {"lags": "3"},
        {"periods": "12"},
        {"q": 1.5},
        {"span": "2010:1977"},
        {"nperm": 0},
        {"fdr_scope": "global"},
        {"workers": 0},
    ])
    def test_invalid_values(self, overrides):
        with pytest.raises(ConfigError):
            load_config(overrides=overrides)

    def test_parsers(self):
        assert parse_span("1977:2010") == (1977, 2010)
        assert parse_int_list("26,6") == (26, 6)
        assert parse_int_list(26) == (26,)
        with pytest.raises(ConfigError):
            parse_span("1977")

    def test_echo_is_json_ready(self):
        data = RunConfig().as_dict()
        assert json.loads(json.dumps(data)) == data


class TestCommandLine:
    def test_synth_analyze_report(self, regions_file, tmp_path):
        catalog = tmp_path / "synthetic.ndk"
        pairs = tmp_path / "pairs.csv"
        out = tmp_path / "out"
        common = ["--span", "2000:2004", "--regions", str(regions_file), "--seed", "5"]

        assert main(["synth", "--out-catalog", str(catalog), "--pairs-out", str(pairs),
                     "--active-cells", "2", "--deep-per-cell", "60", *common]) == 0
        assert catalog.exists() and pairs.exists()

        assert main(["analyze", "--catalog", str(catalog), "--out", str(out), "--nperm", "100",
                     "--lags", "1", "--q", "0.05", *common]) == 0
        assert (out / RESULTS_FILE).exists()
        assert (out / "run.log").exists()

        assert main(["report", "--out", str(out), *common]) == 0
        assert (out / PLOTS_DIR / "panels_1_26.svg").exists()
        assert (out / PLOTS_DIR / "density.svg").exists()

    def test_stage_without_inputs_fails(self, tmp_path):
        assert main(["classify", "--out", str(tmp_path / "empty")]) == 1

    def test_bad_config_fails(self, tmp_path):
        assert main(["analyze", "--config", str(tmp_path / "absent.json"), "--out", str(tmp_path)]) == 1
