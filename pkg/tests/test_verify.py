"""The property-check suite must be green and correctly scoped."""

import pytest

from spectral2d import verify


def test_all_checks_pass():
    results = verify.run("all")
    failed = [r for r in results if not r.passed]
    assert not failed, f"failing checks: {[(r.name, r.detail) for r in failed]}"


@pytest.mark.parametrize("scope", sorted(verify.SCOPES))
def test_scope_selection(scope):
    results = verify.run(scope)
    names = {check.__name__ for check in verify.SCOPES[scope]}
    assert len(results) == len(names)
    assert all(r.passed for r in results)


def test_unknown_scope_rejected():
    with pytest.raises(ValueError, match="scope must be one of"):
        verify.run("everything")


def test_results_carry_details():
    for r in verify.run("spectral"):
        assert r.detail
        assert r.name
