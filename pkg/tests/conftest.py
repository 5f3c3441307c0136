import sys


def pytest_terminal_summary(terminalreporter):
    module = sys.modules.get("test_acceptance")
    results = getattr(module, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(results):
        terminalreporter.write_line(results[number].line())
    passed = sum(v.passed for v in results.values())
    terminalreporter.write_line(f"{passed}/{len(results)} criteria pass")
