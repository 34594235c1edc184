import random
from pathlib import Path

import pytest

FIXTURES = Path(__file__).parent / "fixtures"
EXTRACTION = FIXTURES / "extraction"
GOLDEN_SEPARATOR = "\n----8<----\n"


def read_golden(path: Path) -> list[str]:
    text = path.read_text(encoding="utf-8")
    return text[:-1].split(GOLDEN_SEPARATOR) if text else []


def random_flat_table(rng: random.Random, rows: int, cols: int, rules: bool = True) -> str:
    """A tabular with ``rows`` x ``cols`` non-empty cells and no spanning cells."""
    words = ["a", "Bb", "12", "x y", "$\\alpha$", "\\textbf{z}", "3.5", "{q}"]
    spec = "".join(rng.choice("lrc") + ("|" if rng.random() < 0.3 else "") for _ in range(cols))
    if rng.random() < 0.5:
        spec = "|" + spec
    lines = [f"\\begin{{tabular}}{{{spec}}}"]
    if rules and rng.random() < 0.5:
        lines.append(rng.choice(["\\hline", "\\toprule"]))
    for r in range(rows):
        cells = [rng.choice(words) for _ in range(cols)]
        lines.append(" & ".join(cells) + " \\\\")
        if rules and rng.random() < 0.3:
            lines.append(rng.choice(["\\hline", "\\midrule", "\\cline{1-1}"]))
    lines.append("\\end{tabular}")
    return "\n".join(lines)


@pytest.fixture
def rng():
    return random.Random(1234)


#: (criterion, verdict, text) lines recorded by test_acceptance.py
ACCEPTANCE: list[tuple[int, str, str]] = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number, verdict, text in sorted(ACCEPTANCE):
        terminalreporter.write_line(f"[{verdict}] criterion {number}: {text}")
