import pytest

_LINES: list[str] = []


class AcceptanceLog:
    def record(self, number: int, title: str, ok, detail: str = "") -> None:
        verdict = {True: "PASS", False: "FAIL", None: "SKIP"}[ok]
        line = f"[{verdict}] criterion {number:>2}: {title}"
        if detail:
            line += f" | {detail}"
        _LINES.append(line)
        print(line)


@pytest.fixture(scope="session")
def acceptance():
    return AcceptanceLog()


def pytest_terminal_summary(terminalreporter):
    if _LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_LINES, key=lambda l: int(l.split("criterion")[1].split(":")[0])):
            terminalreporter.write_line(line)
