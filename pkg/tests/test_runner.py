"""Tests for the scenario runner and the built-in scenarios."""

import json

import pytest

from snipesim.harness import ScenarioError
from snipesim.harness.builtin import builtin_scenario, list_scenarios
from snipesim.harness.report import emit_report
from snipesim.harness.runner import ScenarioRunner, apply_overrides, run_scenario
from snipesim.harness.scenario import parse_scenario


def failures(report):
    return [f"{r.description}: {r.detail}" for r in report.expectations if not r.passed]


class TestBuiltinScenarios:
    """Every built-in scenario meets its own expectations."""

    @pytest.mark.parametrize("name", list_scenarios())
    def test_expectations_pass(self, name):
        """Test the scenario passes with replay and supply checks intact."""
        report = run_scenario(builtin_scenario(name))
        assert failures(report) == []
        assert report.replay_consistent
        assert report.supply_conserved
        assert report.passed

    @pytest.mark.parametrize("name", list_scenarios())
    def test_json_report_is_deterministic(self, name):
        """Test two runs with the same seed give byte-identical json."""
        first = emit_report(run_scenario(builtin_scenario(name)), "json")
        second = emit_report(run_scenario(builtin_scenario(name)), "json")
        assert first == second


class TestRoundOne:
    """Test the round-one reproduction in detail."""

    @pytest.fixture(scope="class")
    def report(self):
        return run_scenario(builtin_scenario("round1"))

    def test_contest(self, report):
        """Test all three purchases contest one block and the high snipe wins."""
        assert len(report.contests) == 1
        contest = report.contests[0]
        assert [e.label for e in contest.entrants] == ["buyer", "attacker-high", "attacker-low"]
        assert [e.fee_sats for e in contest.entrants] == [27_985_000, 28_125_000, 100]
        assert contest.winner == "attacker-high"
        assert contest.winner_fee_sats == 28_125_000

    def test_balances(self, report):
        """Test the attacker gains what the seller lost."""
        held = {line.wallet: line.balance for line in report.balances}
        assert held == {"seller": 2_099_000, "attacker_high": 1000}

    def test_outcomes(self, report):
        """Test attack outcomes."""
        outcomes = {o.label: o for o in report.outcomes}
        assert outcomes["attacker-high"].success
        assert outcomes["attacker-high"].victim == "buyer"
        assert not outcomes["attacker-low"].included

    def test_text_report(self, report):
        """Test the winner block in the text rendering."""
        text = emit_report(report, "text").decode()
        assert "winner tx fee_sats=28125000\n  role=attacker-high\n  txid=" in text
        assert text.rstrip().endswith("result PASS")

    def test_timeline(self, report):
        """Test one snapshot per action, ending with an empty pool."""
        assert len(report.timeline) == 8
        assert [len(s.mempool) for s in report.timeline[4:]] == [1, 2, 3, 0]

    def test_listing_published(self, report):
        """Test the designated-buyer listing waits for the buyer's signature."""
        listing = report.listings[0]
        assert listing.label == "listing"
        assert not listing.complete
        assert listing.psbt.startswith("psbt1:")


class TestOverrides:
    """Test seed and policy overrides."""

    def test_seed_changes_txids_not_outcomes(self):
        """Test a different seed reproduces the same economics."""
        base = run_scenario(builtin_scenario("round1"))
        other = run_scenario(apply_overrides(builtin_scenario("round1"), seed=99))
        assert other.seed == 99
        assert other.passed
        assert base.contests[0].winner_txid != other.contests[0].winner_txid

    def test_rbf_policy_leaves_no_victim(self):
        """Test under replace-by-fee the low snipe finds its target gone."""
        scenario = apply_overrides(builtin_scenario("round1"), policy="rbf")
        assert scenario.policy.mode.value == "rbf-replace"
        with pytest.raises(ScenarioError, match=r"step 6 \(snipe\)") as exc_info:
            run_scenario(scenario)
        assert exc_info.value.step == 6
        assert "NoVictim" in str(exc_info.value)

    def test_fee_lock_without_commitment(self):
        """Test enforcing fee locks does not affect unlocked listings."""
        report = run_scenario(apply_overrides(builtin_scenario("round1"), fee_lock=True))
        assert "fee_lock=on" in report.policy
        assert report.passed

    def test_no_overrides(self):
        """Test the scenario is returned untouched."""
        scenario = builtin_scenario("baseline")
        assert apply_overrides(scenario) is scenario

    def test_unknown_policy(self):
        """Test an unrecognised policy override is a scenario error."""
        with pytest.raises(ScenarioError, match="Unknown policy 'fifo'"):
            apply_overrides(builtin_scenario("baseline"), policy="fifo")
        assert apply_overrides(builtin_scenario("baseline"), policy="rbf-replace").policy.mode.value == "rbf-replace"


class TestRunnerErrors:
    """Test failing steps and failing expectations."""

    def document(self, actors, expectations=()):
        return {
            "name": "custom",
            "policy": {"min_relay_fee_rate": "0"},
            "wallets": ["seller", "buyer", "miner"],
            "genesis_allocations": [
                {"wallet": "seller", "amount": 1_000_000},
                {"wallet": "buyer", "amount": 1_000_000},
            ],
            "actors": actors,
            "expectations": list(expectations),
        }

    def test_unknown_listing(self):
        """Test buying an unpublished listing names the step."""
        scenario = parse_scenario(self.document([{"action": "buy", "wallet": "buyer", "change": 1}]))
        with pytest.raises(ScenarioError, match=r"step 0 \(buy\): KeyError: Unknown listing"):
            run_scenario(scenario)

    def test_insufficient_balance(self):
        """Test an unaffordable listing purchase."""
        actors = [
            {"action": "deploy", "wallet": "seller", "tick": "ordi", "max": 10, "lim": 10},
            {"action": "mine", "miner": "miner"},
            {"action": "publish-psbt", "wallet": "seller", "tick": "ordi", "amt": 5, "price": 5_000_000},
            {"action": "mine", "miner": "miner"},
            {"action": "buy", "wallet": "buyer", "fee_rate": "1"},
        ]
        with pytest.raises(ScenarioError, match="InsufficientBalance") as exc_info:
            run_scenario(parse_scenario(self.document(actors)))
        assert exc_info.value.action == "buy"

    def test_failed_expectation_reported(self):
        """Test unmet expectations fail the report without raising."""
        actors = [{"action": "mine", "miner": "miner"}]
        expectations = [
            {"kind": "mempool-size", "equals": 3},
            {"kind": "winner", "label": "buyer"},
            {"kind": "fee", "label": "ghost", "equals": 1},
        ]
        report = run_scenario(parse_scenario(self.document(actors, expectations)))
        assert not report.passed
        assert [r.passed for r in report.expectations] == [False, False, False]
        assert report.expectations[1].detail == "no contest recorded"
        assert "ghost" in report.expectations[2].detail

    def test_runner_nonces_are_seeded(self):
        """Test commitment nonces derive from seed and label."""
        scenario = builtin_scenario("mitigation-feelock")
        runner = ScenarioRunner(scenario)
        assert runner.nonce("listing") == ScenarioRunner(scenario).nonce("listing")
        assert runner.nonce("listing") != runner.nonce("other")
        other = ScenarioRunner(apply_overrides(scenario, seed=1))
        assert other.nonce("listing") != runner.nonce("listing")

    def test_json_report_shape(self):
        """Test the json report parses and names the scenario."""
        document = json.loads(emit_report(run_scenario(builtin_scenario("baseline")), "json"))
        assert document["scenario"] == "baseline"
        assert document["expectations"][0]["passed"] is True
