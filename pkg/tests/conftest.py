def pytest_terminal_summary(terminalreporter, exitstatus, config):
    """One pass/fail line per acceptance criterion at the end of the run."""
    reports = []
    for key in ("passed", "failed", "error"):
        reports.extend(terminalreporter.stats.get(key, []))
    acceptance = sorted(
        (r for r in reports
         if getattr(r, "when", "call") == "call"
         and "test_acceptance" in r.nodeid),
        key=lambda r: r.nodeid,
    )
    if not acceptance:
        return
    terminalreporter.write_sep("-", "acceptance criteria")
    for r in acceptance:
        outcome = "PASS" if r.passed else "FAIL"
        name = r.nodeid.split("::")[-1]
        terminalreporter.write_line(f"{outcome}  {name}")
