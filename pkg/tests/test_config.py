import pytest

from cvlangevin.config import DEFAULTS, load_config, resolve


class TestLoadConfig:
    def test_parses_types(self, tmp_path):
        path = tmp_path / "run.cfg"
        path.write_text(
            """
            # comment line
            t_count = 200
            eps = 1e-6   # inline comment
            schedule_kind = linear
            """
        )
        cfg = load_config(path)
        assert cfg == {"t_count": 200, "eps": 1e-6, "schedule_kind": "linear"}

    def test_malformed_line_rejected(self, tmp_path):
        path = tmp_path / "bad.cfg"
        path.write_text("this is not a key value pair\n")
        with pytest.raises(ValueError):
            load_config(path)


class TestResolve:
    def test_defaults_pass_through(self):
        cfg = resolve()
        assert cfg == DEFAULTS

    def test_layering(self):
        cfg = resolve({"eps": 1e-6}, {"eps": 1e-7, "t_count": 10})
        assert cfg["eps"] == 1e-7
        assert cfg["t_count"] == 10
        assert cfg["fwc"] == DEFAULTS["fwc"]

    def test_unknown_key_rejected(self):
        with pytest.raises(ValueError):
            resolve({"not_a_key": 1})

    def test_every_documented_default_present(self):
        for key in (
            "t_count",
            "sigma1_ratio",
            "sigmaT_ratio",
            "eps",
            "steps_per_level",
            "clamp_floor",
            "fwc",
            "quant_bits",
            "rho",
            "pad_factor",
            "hio_beta",
            "hio_iters",
            "hio_restarts",
            "runs",
            "complex_convention",
        ):
            assert key in DEFAULTS
