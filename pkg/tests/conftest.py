import re

_CRITERION = re.compile(r"test_acceptance\.py::test_criterion_(\d+)$")


def pytest_terminal_summary(terminalreporter):
    from test_acceptance import CRITERIA

    results = {}
    for outcome in ("passed", "failed", "error", "skipped"):
        for rep in terminalreporter.stats.get(outcome, []):
            m = _CRITERION.search(getattr(rep, "nodeid", ""))
            if m and (rep.when == "call" or outcome != "passed"):
                results[int(m.group(1))] = ("PASS" if outcome == "passed" else outcome.upper(), rep.duration)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(results):
        status, dur = results[n]
        terminalreporter.write_line(f"criterion {n} [{CRITERIA[n]}]: {status} ({dur:.1f}s)")
