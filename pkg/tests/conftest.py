import datetime as dt

import pytest

from gnrisk.loan_data import Contract, Customer, Guarantee, LoanDataset, Repayment
from gnrisk.synth import SynthConfig, generate


def D(text):
    return dt.date.fromisoformat(text)


def customer(cid, scale="small", reg="2010-01-01", capital=1_000_000, employees=20, nature="retail"):
    return Customer(cid, nature, capital, scale, employees, D(reg))


def contract(cid, borrower, start="2013-01-10", term=12, amount=500_000, cap="bullet", interest="monthly"):
    return Contract(cid, borrower, amount, D(start), term, cap, interest)


def guarantee(cid, guarantor, signed="2013-01-05", amount=500_000):
    return Guarantee(cid, guarantor, amount, D(signed))


def repayment(cid, due, paid="same", amount=1000):
    paid_date = D(due) if paid == "same" else (None if paid is None else D(paid))
    return Repayment(cid, D(due), amount, paid_date, amount if paid_date else 0)


@pytest.fixture
def fan_out():
    """A guarantees the loans of B and C."""
    return LoanDataset.from_records(
        customers=[customer("A"), customer("B"), customer("C")],
        contracts=[contract("L1", "B"), contract("L2", "C")],
        guarantees=[guarantee("L1", "A"), guarantee("L2", "A")],
        repayments=[repayment("L1", "2013-02-10"), repayment("L2", "2013-02-10", paid=None)],
    )


@pytest.fixture(scope="session")
def small_synth():
    cfg = SynthConfig(n_customers=800, n_months=36, seed=7)
    return generate(cfg)


_ACCEPTANCE = pytest.StashKey[list]()


@pytest.fixture
def report(request):
    """Record one PASS/FAIL line for the acceptance summary and fail the test on FAIL."""
    lines = request.config.stash.setdefault(_ACCEPTANCE, [])

    def _report(name, ok, detail):
        line = f"{'PASS' if ok else 'FAIL'} {name}: {detail}"
        lines.append(line)
        assert ok, line
    return _report


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(_ACCEPTANCE, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
