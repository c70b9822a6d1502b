from hypothesis import HealthCheck, settings

# the first call into a numba oracle loads its compiled cache, so per-example timing is meaningless
settings.register_profile("lite3d", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("lite3d")


def pytest_terminal_summary(terminalreporter):
    import sys

    module = sys.modules.get("test_acceptance")
    lines = getattr(module, "CRITERIA", None)
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(lines):
        terminalreporter.write_line(lines[number])
