def pytest_terminal_summary(terminalreporter):
    import test_acceptance

    results = getattr(test_acceptance, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(results):
        terminalreporter.write_line(results[number])
