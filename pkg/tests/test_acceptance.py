"""Runs the acceptance suite through pytest."""
import glob
import json
import os

import pytest

from acceptance_suite import AcceptanceSuite, main


class TestAcceptanceSuite:
    def test_summary_lists_every_check(self, capsys):
        with pytest.raises(SystemExit) as excinfo:
            main(["--summary"])
        assert excinfo.value.code == 0
        output = capsys.readouterr().out
        assert "fig1c" in output
        assert "[10] brute_force" in output

    def test_recipe_filter(self, tmp_path):
        suite = AcceptanceSuite(results_dir=str(tmp_path))
        results = suite.run_all_tests(recipe_filter="fig1b")
        assert [result["name"] for result in results] == ["convergent_panels"]
        assert results[0]["passed"], results[0]
        saved = glob.glob(os.path.join(str(tmp_path), "acceptance_results_*.json"))
        assert len(saved) == 1
        with open(saved[0], encoding="utf-8") as f:
            assert json.load(f)["summary"]["passed_tests"] == 1

    def test_noisy_panels_use_convergence_tolerance(self, tmp_path):
        suite = AcceptanceSuite(results_dir=str(tmp_path))
        results = suite.run_all_tests(recipe_filter="fig1e")
        assert [result["name"] for result in results] == ["stochastic_panels"]
        details = results[0]["details"]
        assert details["tolerance"] == 0.05
        assert details["fig1e_converged"] >= 30
        assert results[0]["passed"], results[0]

    def test_unknown_recipe_filter(self, tmp_path):
        assert AcceptanceSuite(results_dir=str(tmp_path)).run_all_tests(recipe_filter="fig9z") == []

    def test_all_checks_pass(self, tmp_path):
        suite = AcceptanceSuite(results_dir=str(tmp_path))
        suite.run_all_tests()
        assert len(suite.test_results) == 11
        assert not suite.failed_tests, [(r["name"], r["details"], r["error"]) for r in suite.failed_tests]
