import pytest

from srgt.config import (ABLATIONS, ExperimentConfig, apply_ablation,
                         load_config, parse_config, set_key)


class TestParse:
    def test_defaults(self):
        cfg = parse_config("")
        assert cfg.model.d == 32
        assert cfg.ablation == "full"

    def test_sections_and_types(self):
        cfg = parse_config("model.d = 16\n"
                           "model.use_ffn = true\n"
                           "graph.alpha = 0.5\n"
                           "train.window = 3\n"
                           "eval.seeds = 1,2,3\n"
                           "dataset.path = data.txt\n")
        assert cfg.model.d == 16
        assert cfg.model.use_ffn is True
        assert cfg.graph.alpha == 0.5
        assert cfg.train.window == 3
        assert cfg.eval.seeds == (1, 2, 3)
        assert cfg.dataset.path == "data.txt"

    def test_comments_and_blank_lines(self):
        cfg = parse_config("# a comment\n\nmodel.n_heads = 2\n")
        assert cfg.model.n_heads == 2

    def test_last_writer_wins(self):
        cfg = parse_config("model.d = 16\nmodel.d = 64\n")
        assert cfg.model.d == 64

    def test_unknown_key_rejected(self):
        with pytest.raises(ValueError, match="unknown config key"):
            parse_config("model.nonsense = 1\n")
        with pytest.raises(ValueError, match="section"):
            parse_config("bogus.d = 1\n")

    def test_malformed_line_reports_number(self):
        with pytest.raises(ValueError, match="line 2"):
            parse_config("model.d = 8\nnot a pair\n")

    def test_bad_boolean_rejected(self):
        with pytest.raises(ValueError, match="boolean"):
            parse_config("model.use_ffn = maybe\n")


class TestAblation:
    def test_known_presets_only(self):
        with pytest.raises(ValueError):
            ExperimentConfig(ablation="X")
        with pytest.raises(ValueError):
            apply_ablation(parse_config("ablation = X\n"))

    def test_full_keeps_everything_on(self):
        cfg = apply_ablation(ExperimentConfig())
        m = cfg.model
        assert all([m.use_edge_types, m.use_edge_weights, m.use_diff_graph,
                    m.use_topo_attr, m.use_path_attr])

    @pytest.mark.parametrize("name,off", [
        ("T", ["use_edge_types"]),
        ("W", ["use_edge_weights"]),
        ("TW", ["use_edge_types", "use_edge_weights", "use_diff_graph"]),
        ("S", ["use_topo_attr"]),
        ("P", ["use_path_attr"]),
        ("SP", ["use_topo_attr", "use_path_attr"]),
    ])
    def test_preset_switches(self, name, off):
        cfg = ExperimentConfig(ablation=name)
        apply_ablation(cfg)
        flags = ["use_edge_types", "use_edge_weights", "use_diff_graph",
                 "use_topo_attr", "use_path_attr"]
        for flag in flags:
            assert getattr(cfg.model, flag) is (flag not in off)

    def test_all_presets_enumerated(self):
        assert ABLATIONS == ("full", "T", "W", "TW", "S", "P", "SP")


class TestOverrides:
    def test_set_key_dotted(self):
        cfg = ExperimentConfig()
        set_key(cfg, "train.lr", "0.01")
        assert cfg.train.lr == 0.01

    def test_set_key_top_level(self):
        cfg = ExperimentConfig()
        set_key(cfg, "out_dir", "elsewhere")
        assert cfg.out_dir == "elsewhere"

    def test_load_config_applies_overrides_last(self, tmp_path):
        path = tmp_path / "exp.cfg"
        path.write_text("model.d = 16\nablation = T\n")
        cfg = load_config(path, overrides=[("model.d", "8")])
        assert cfg.model.d == 8
        assert cfg.model.use_edge_types is False  # ablation applied on load


def test_to_dict_round_trips_seeds():
    d = ExperimentConfig().to_dict()
    assert d["eval"]["seeds"] == [0, 1, 2, 3, 4]
    assert d["model"]["d"] == 32
