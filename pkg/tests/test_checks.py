import pytest

from daeflow import checks
from daeflow.cli import main

FAST = ["measures.heat_semigroup", "analytic_dae.semigroup", "stacking.conjugacy_continuous"]


class TestRegistry:
    def test_every_module_has_checks(self):
        modules = {name.split(".")[0] for name in checks.REGISTRY}
        assert modules == {"measures", "analytic_dae", "empirical_dae", "flows", "ridgelet", "stacking", "cli"}

    def test_duplicate_name_rejected(self):
        with pytest.raises(ValueError):
            checks.check("measures.heat_semigroup")(lambda seed: (True, ""))

    def test_subset_passes(self):
        results = checks.run_checks(FAST)
        assert [r.name for r in results] == FAST
        assert all(r.passed for r in results)


class TestCorruption:
    def test_tolerance_names_failure(self, monkeypatch):
        monkeypatch.setattr(checks, "SEMIGROUP_TOL", 0.0)
        results = {r.name: r for r in checks.run_checks(FAST)}
        assert not results["analytic_dae.semigroup"].passed
        assert results["measures.heat_semigroup"].passed

    def test_crash_is_failure(self, monkeypatch):
        def boom(seed):
            raise RuntimeError("kaput")

        monkeypatch.setitem(checks.REGISTRY, "analytic_dae.semigroup", boom)
        (res,) = checks.run_checks(["analytic_dae.semigroup"])
        assert not res.passed and "kaput" in res.detail

    def test_verify_exit_code(self, monkeypatch, capsys):
        monkeypatch.setattr(checks, "REGISTRY", {k: checks.REGISTRY[k] for k in FAST})
        assert main(["verify"]) == 0
        monkeypatch.setattr(checks, "SEMIGROUP_TOL", 0.0)
        capsys.readouterr()
        assert main(["verify"]) == 3
        out = capsys.readouterr().out
        assert "FAIL  analytic_dae.semigroup" in out
        assert "2/3 checks passed" in out
        assert out.rstrip().endswith("failed: analytic_dae.semigroup")
