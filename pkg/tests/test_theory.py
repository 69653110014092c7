import pytest

from driftspec import theory
from driftspec.exceptions import PreconditionError
from driftspec.theory import CHECKS, PROFILES, TheoryCheck, run_theory_suite

FAST_CHECKS = ["max_method", "chart_distance", "lipschitz", "jacobian"]


def test_fast_checks_pass() -> None:
    report = run_theory_suite("quick", seed=3, only=FAST_CHECKS)
    # reported in suite order, not in the order asked for
    assert [check.name for check in report.checks] == [
        name for name in CHECKS if name in FAST_CHECKS
    ]
    for check in report.checks:
        assert check.passed, check.detail
    assert report.passed
    assert report.profile == "quick"
    assert report.seed == 3


def test_unknown_check() -> None:
    with pytest.raises(KeyError, match="Unknown check"):
        run_theory_suite(only=["chart_distance", "astrology"])


def test_errors_become_failed_checks(monkeypatch: pytest.MonkeyPatch) -> None:
    def broken(profile, seed, threads):  # type: ignore[no-untyped-def]
        raise PreconditionError("eigenvalues coincide")

    monkeypatch.setitem(CHECKS, "chart_distance", broken)
    report = run_theory_suite(only=["chart_distance"])
    (check,) = report.checks
    assert not check.passed
    assert "PreconditionError" in check.detail
    assert not report.passed


def test_custom_profile(monkeypatch: pytest.MonkeyPatch) -> None:
    seen = []

    def record(profile, seed, threads):  # type: ignore[no-untyped-def]
        seen.append((profile.name, seed, threads))
        return TheoryCheck(name="lipschitz", passed=True)

    monkeypatch.setitem(theory.CHECKS, "lipschitz", record)
    profile = PROFILES["quick"].model_copy(update={"name": "tiny"})
    report = run_theory_suite(profile, seed=8, threads=2, only=["lipschitz"])
    index = list(CHECKS).index("lipschitz")
    assert seen == [("tiny", 8 ^ index, 2)]
    assert report.profile == "tiny"


@pytest.mark.slow
def test_quick_suite_passes() -> None:
    report = run_theory_suite("quick", seed=0, threads=4)
    assert len(report.checks) == len(CHECKS)
    failed = [check for check in report.checks if not check.passed]
    assert not failed, [(check.name, check.detail) for check in failed]
