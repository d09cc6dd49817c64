from __future__ import annotations

import pytest

from curvlab.campaigns import CAMPAIGNS, derive_seed, expand_pairs, run_campaign
from curvlab.errors import ConfigError


def test_derive_seed_stable_and_distinct():
    assert derive_seed(1729, "lu", 5, 3) == derive_seed(1729, "lu", 5, 3)
    assert derive_seed(1729, "lu", 5, 3) != derive_seed(1729, "lu", 5, 4)
    assert derive_seed(1729, "lu") != derive_seed(1730, "lu")
    assert 0 <= derive_seed(0, "x") < 2**63


@pytest.mark.parametrize(
    "entry,pairs",
    [
        ({"pairs": [[3, 2], [5, 3]]}, [(3, 2), (5, 3)]),
        ({"n": 3}, [(3, 1), (3, 2), (3, 3)]),
        ({"n": [4, 5], "k": "n-1"}, [(4, 3), (5, 4)]),
        ({"n": {"min": 2, "max": 3}, "k_min": 2}, [(2, 2), (3, 2), (3, 3)]),
        ({"n": 6, "k": "n"}, [(6, 6)]),
        ({"n": 6, "k": [2, 9]}, [(6, 2)]),
    ],
)
def test_expand_pairs(entry, pairs):
    assert expand_pairs(entry) == pairs


@pytest.mark.parametrize("entry", [{}, {"n": "many"}, {"n": True}, {"pairs": [[1]]}, {"n": 3, "k": "n+1"}])
def test_expand_pairs_errors(entry):
    with pytest.raises(ConfigError):
        expand_pairs(entry)


@pytest.mark.parametrize(
    "entry",
    [
        {"campaign": "nope", "n": 3},
        {"campaign": "identities", "n": 3, "budget": -1},
        {"campaign": "identities", "n": 3, "budget": "lots"},
        ["identities"],
        {"campaign": "renwang", "n": 4, "k": 2, "budget": 10},
        {"campaign": "identities", "pairs": [[2, 3]], "budget": 10},
    ],
)
def test_run_campaign_config_errors(entry):
    with pytest.raises(ConfigError):
        run_campaign(entry, seed=0)


@pytest.mark.parametrize("name", sorted(set(CAMPAIGNS) - {"renwang", "lu"}))
def test_small_campaigns_pass(name):
    reps = run_campaign({"campaign": name, "n": [3, 5], "k_min": 2, "budget": 500}, seed=3)
    assert reps and all(r.passed for r in reps)
    assert all(r.samples_tested > 0 for r in reps if name != "semiconvexity" or r.params["k"] < r.params["n"])


def test_identity_campaign_includes_k1_and_large_n():
    reps = run_campaign({"campaign": "identities", "pairs": [[10, 1], [10, 10]], "budget": 200}, seed=1)
    assert all(r.passed for r in reps)


def test_semiconvexity_skips_k_equal_n():
    reps = run_campaign({"campaign": "semiconvexity", "pairs": [[4, 4]], "budget": 100}, seed=1)
    assert all(r.samples_tested == 0 for r in reps)


def test_dominance_reports_empirical_constant():
    (rep,) = run_campaign({"campaign": "sigma_l_dominance", "pairs": [[5, 3]], "budget": 1000}, seed=2)
    assert rep.found_constant is not None and rep.found_constant >= 1.0


def test_renwang_and_lu_small():
    reps = run_campaign({"campaign": "renwang", "pairs": [[3, 2]], "budget": 300, "thresholds": [10, 100]}, seed=4)
    assert len(reps) == 2 and all(r.passed and r.found_constant for r in reps)
    reps = run_campaign({"campaign": "lu", "pairs": [[4, 3]], "budget": 300}, seed=4)
    assert [r.params["l"] for r in reps] == [1, 2] and all(r.passed for r in reps)


def test_campaigns_deterministic():
    entry = {"campaign": "quotient_concavity", "n": 4, "k_min": 2, "budget": 300}
    a = [r.to_dict() for r in run_campaign(entry, seed=11)]
    b = [r.to_dict() for r in run_campaign(entry, seed=11)]
    c = [r.to_dict() for r in run_campaign(entry, seed=12)]
    assert a == b and a != c


def test_underscore_names_accepted():
    assert run_campaign({"campaign": "kappa_sq_trace", "pairs": [[3, 2]], "budget": 10}, seed=0)[0].campaign == "kappa-sq-trace"


def test_zero_budget_is_empty():
    (rep,) = run_campaign({"campaign": "negative_kappa", "pairs": [[3, 2]], "budget": 0}, seed=0)
    assert rep.samples_tested == 0 and rep.passed
