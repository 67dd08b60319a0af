import re

_criteria: dict[str, dict] = {}


def pytest_runtest_logreport(report):
    match = re.search(r"::test_ac(\d+)_(\w+)", report.nodeid)
    if not match or (report.when != "call" and report.passed):
        return
    key = f"AC-{match.group(1)}"
    entry = _criteria.setdefault(key, {"name": match.group(2).replace("_", " "), "ok": True, "detail": ""})
    entry["ok"] = entry["ok"] and report.passed
    for name, value in report.user_properties:
        if name == "detail":
            entry["detail"] = value


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(_criteria, key=lambda k: int(k.split("-")[1])):
        entry = _criteria[key]
        verdict = "PASS" if entry["ok"] else "FAIL"
        terminalreporter.write_line(f"{key} {verdict}  {entry['name']}: {entry['detail']}")
