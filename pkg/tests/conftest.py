from collections import defaultdict

import pytest

_results: dict[int, list] = defaultdict(list)
_titles = {
    1: "non-uniqueness moment family",
    2: "crossing recursion vs ODE engine",
    3: "series classifications",
    4: "telescoping identity",
    5: "non-existence verdicts",
    6: "oscillation collapse",
    7: "Monte Carlo consistency",
    8: "invariant suites",
}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("acceptance")
    if mark is None:
        return
    if rep.when == "call" or (rep.when == "setup" and not rep.passed):
        detail = "; ".join(v for k, v in item.user_properties if k == "detail")
        _results[mark.args[0]].append((item.name, rep.passed, rep.duration, detail))


def pytest_terminal_summary(terminalreporter):
    if not _results:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_results):
        rows = _results[n]
        ok = all(r[1] for r in rows)
        secs = sum(r[2] for r in rows)
        notes = " | ".join(f"{name}: {d}" for name, _, _, d in rows if d)
        failed = [name for name, passed, _, _ in rows if not passed]
        tail = f" failed={','.join(failed)}" if failed else ""
        terminalreporter.write_line(
            f"criterion {n} {'PASS' if ok else 'FAIL'} {_titles.get(n, '')} ({secs:.2f}s){tail}" + (f" [{notes}]" if notes else "")
        )
