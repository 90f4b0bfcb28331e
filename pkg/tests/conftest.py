import pytest

from poseprop.synth import default_scene, generate_video

from helpers import PLAIN


@pytest.fixture(scope="session")
def small_video():
    """80-frame figure without background clutter or lighting drift; (frames, gt)."""
    return generate_video(default_scene(n_frames=80, **PLAIN), seed=3)


def pytest_terminal_summary(terminalreporter):
    from helpers import ACCEPTANCE

    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, title, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n}: {'PASS' if ok else 'FAIL'}  {title}  [{detail}]")
