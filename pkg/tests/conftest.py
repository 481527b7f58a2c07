"""Shared strategies and fixtures.

Parameter draws are kept inside the bad-cavity validity region (g well below
kappa) so the analytic routes under test are meaningful; individual tests
widen or narrow ranges as needed.

Also hosts the acceptance-criterion registry: each acceptance test reports
one PASS/FAIL line through :func:`record_criterion`, and the lines are
printed in a terminal summary block so they survive output capture.
"""

from hypothesis import strategies as st

from cavicool.params import SystemParams

ACCEPTANCE_RESULTS: dict = {}


def record_criterion(number: int, passed: bool, detail: str) -> None:
    ACCEPTANCE_RESULTS[number] = (bool(passed), detail)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE_RESULTS):
        passed, detail = ACCEPTANCE_RESULTS[k]
        word = "PASS" if passed else "FAIL"
        terminalreporter.write_line(f"criterion {k}: {word} -- {detail}")


def _finite(lo, hi):
    return st.floats(min_value=lo, max_value=hi, allow_nan=False, allow_infinity=False)


@st.composite
def system_params(draw, with_recoil=False, max_N=1.0):
    kappa = draw(_finite(0.5, 8.0))
    p = dict(
        g=draw(_finite(0.02, 0.3)) * kappa,
        kappa=kappa,
        Omega=draw(_finite(0.0, 2.0)),
        Delta=draw(_finite(-4.0, 4.0)),
        Delta_c=draw(_finite(-4.0, 4.0)),
        N=draw(_finite(0.0, max_N)),
    )
    if with_recoil:
        p["eta"] = draw(_finite(0.0, 0.1))
        p["eta_c"] = draw(_finite(0.0, 0.1))
    return SystemParams(**p)
