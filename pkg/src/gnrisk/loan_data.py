"""Loan-record schema, CSV ingestion, validation and the contract-level join.

Four logical tables make up a dataset: customers, contracts, guarantees and
repayments.  Tables are held as pandas frames with fixed column dtypes:
dates are ``datetime64[D]`` (``NaT`` for an unpaid repayment) and money is
``int64`` minor units.
"""
from __future__ import annotations

import csv
import datetime as dt
import io
import os
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
import pandas as pd

TABLES = ("customers", "contracts", "guarantees", "repayments")

SCHEMA = {
    "customers": (
        ("customer_id", "str"),
        ("business_nature", "str"),
        ("registered_capital", "money"),
        ("enterprise_scale", "str"),
        ("employee_count", "int"),
        ("registration_date", "date"),
    ),
    "contracts": (
        ("contract_id", "str"),
        ("borrower_id", "str"),
        ("loan_amount", "money"),
        ("start_date", "date"),
        ("term_months", "int"),
        ("capital_return_type", "str"),
        ("interest_return_type", "str"),
    ),
    "guarantees": (
        ("contract_id", "str"),
        ("guarantor_id", "str"),
        ("guarantee_amount", "money"),
        ("signed_date", "date"),
    ),
    "repayments": (
        ("contract_id", "str"),
        ("due_date", "date"),
        ("amount_due", "money"),
        ("paid_date", "optdate"),
        ("amount_paid", "money"),
    ),
}

PRIMARY_KEYS = {
    "customers": ("customer_id",),
    "contracts": ("contract_id",),
}

ENTERPRISE_SCALES = ("micro", "small", "medium", "large")
BUSINESS_NATURES = ("manufacturing", "wholesale", "retail", "construction", "services", "agriculture")
CAPITAL_RETURN_TYPES = ("bullet", "installment", "balloon")
INTEREST_RETURN_TYPES = ("monthly", "quarterly", "at_maturity")


class DataError(Exception):
    """Raised for unreadable or structurally broken input tables."""

    def __init__(self, message, file=None, line=None, column=None):
        self.file = file
        self.line = line
        self.column = column
        loc = ":".join(str(p) for p in (file, line, column) if p is not None)
        super().__init__(f"{loc}: {message}" if loc else message)


@dataclass(frozen=True)
class Customer:
    customer_id: str
    business_nature: str
    registered_capital: int
    enterprise_scale: str
    employee_count: int
    registration_date: dt.date


@dataclass(frozen=True)
class Contract:
    contract_id: str
    borrower_id: str
    loan_amount: int
    start_date: dt.date
    term_months: int
    capital_return_type: str
    interest_return_type: str


@dataclass(frozen=True)
class Guarantee:
    contract_id: str
    guarantor_id: str
    guarantee_amount: int
    signed_date: dt.date


@dataclass(frozen=True)
class Repayment:
    contract_id: str
    due_date: dt.date
    amount_due: int
    paid_date: dt.date | None
    amount_paid: int

    @property
    def default_flag(self) -> bool:
        return self.paid_date is None or self.paid_date > self.due_date


def _empty_frame(table: str) -> pd.DataFrame:
    cols = {}
    for name, kind in SCHEMA[table]:
        if kind in ("date", "optdate"):
            cols[name] = np.array([], dtype="datetime64[D]")
        elif kind in ("money", "int"):
            cols[name] = np.array([], dtype=np.int64)
        else:
            cols[name] = np.array([], dtype=object)
    return pd.DataFrame(cols)


def _frame_from_columns(table: str, columns: dict) -> pd.DataFrame:
    out = {}
    for name, kind in SCHEMA[table]:
        values = columns[name]
        if kind in ("date", "optdate"):
            out[name] = np.array(values, dtype="datetime64[D]")
        elif kind in ("money", "int"):
            out[name] = np.array(values, dtype=np.int64)
        else:
            out[name] = np.array(values, dtype=object)
    return pd.DataFrame(out)


def month_index(dates) -> np.ndarray:
    """Months since 1970-01 for an array of ``datetime64[D]`` values."""
    return np.asarray(dates, dtype="datetime64[D]").astype("datetime64[M]").astype(np.int64)


def add_months(dates, months) -> np.ndarray:
    """Shift dates by whole months, clipping the day to the target month's end."""
    d = np.asarray(dates, dtype="datetime64[D]")
    m = d.astype("datetime64[M]")
    day = (d - m.astype("datetime64[D]")).astype(np.int64)
    target = m + np.asarray(months, dtype=np.int64)
    month_len = ((target + 1).astype("datetime64[D]") - target.astype("datetime64[D]")).astype(np.int64)
    return target.astype("datetime64[D]") + np.minimum(day, month_len - 1)


@dataclass
class LoanDataset:
    """The four joined loan tables.  Treated as immutable once built."""

    customers: pd.DataFrame = field(default_factory=lambda: _empty_frame("customers"))
    contracts: pd.DataFrame = field(default_factory=lambda: _empty_frame("contracts"))
    guarantees: pd.DataFrame = field(default_factory=lambda: _empty_frame("guarantees"))
    repayments: pd.DataFrame = field(default_factory=lambda: _empty_frame("repayments"))

    @classmethod
    def from_records(cls, customers=(), contracts=(), guarantees=(), repayments=()) -> "LoanDataset":
        frames = {}
        for table, rows in zip(TABLES, (customers, contracts, guarantees, repayments)):
            rows = list(rows)
            names = [name for name, _ in SCHEMA[table]]
            columns = {name: [getattr(r, name) for r in rows] for name in names}
            frames[table] = _frame_from_columns(table, columns)
        return cls(**frames)

    def table(self, name: str) -> pd.DataFrame:
        return getattr(self, name)

    @property
    def default_flags(self) -> np.ndarray:
        due = self.repayments["due_date"].to_numpy("datetime64[D]")
        paid = self.repayments["paid_date"].to_numpy("datetime64[D]")
        return np.isnat(paid) | (paid > due)

    @property
    def maturity_dates(self) -> np.ndarray:
        return add_months(self.contracts["start_date"].to_numpy("datetime64[D]"),
                          self.contracts["term_months"].to_numpy())

    def truncate(self, cutoff) -> "LoanDataset":
        """Drop everything dated on or after ``cutoff``.

        Customers are dated by registration, contracts by start, guarantees by
        signing, repayments by due date.  Payments observed on or after the
        cutoff are blanked (the repayment then reads as unpaid).
        """
        cutoff = np.datetime64(cutoff, "D")
        cust = self.customers[self.customers["registration_date"].to_numpy("datetime64[D]") < cutoff]
        con = self.contracts[self.contracts["start_date"].to_numpy("datetime64[D]") < cutoff]
        gua = self.guarantees[self.guarantees["signed_date"].to_numpy("datetime64[D]") < cutoff]
        gua = gua[gua["contract_id"].isin(con["contract_id"])]
        rep = self.repayments[self.repayments["due_date"].to_numpy("datetime64[D]") < cutoff].copy()
        late = rep["paid_date"].to_numpy("datetime64[D]") >= cutoff
        if late.any():
            paid = rep["paid_date"].to_numpy("datetime64[D]").copy()
            paid[late] = np.datetime64("NaT")
            rep["paid_date"] = paid
            amt = rep["amount_paid"].to_numpy().copy()
            amt[late] = 0
            rep["amount_paid"] = amt
        return LoanDataset(*(f.reset_index(drop=True) for f in (cust, con, gua, rep)))


# --------------------------------------------------------------------------- IO

def _parse_cell(kind: str, text: str):
    if kind == "str":
        if text == "":
            raise ValueError("empty value")
        return text
    if kind in ("money", "int"):
        return int(text)
    if kind == "optdate" and text == "":
        return None
    return dt.date.fromisoformat(text)


def _read_table(table: str, path: str) -> pd.DataFrame:
    if not os.path.exists(path):
        raise DataError("file not found", file=path)
    expected = [name for name, _ in SCHEMA[table]]
    kinds = [kind for _, kind in SCHEMA[table]]
    columns = {name: [] for name in expected}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError("missing header row", file=path, line=1) from None
        if header != expected:
            raise DataError(f"header must be {','.join(expected)}", file=path, line=1)
        for row in reader:
            line = reader.line_num
            if len(row) != len(expected):
                raise DataError(f"expected {len(expected)} fields, got {len(row)}", file=path, line=line)
            for name, kind, text in zip(expected, kinds, row):
                try:
                    value = _parse_cell(kind, text)
                except ValueError as exc:
                    raise DataError(f"bad value {text!r} ({exc})", file=path, line=line, column=name) from None
                columns[name].append(value)
    frame = _frame_from_columns(table, columns)
    for key in PRIMARY_KEYS.get(table, ()):
        dup = frame[key].duplicated()
        if dup.any():
            first = int(np.flatnonzero(dup.to_numpy())[0])
            raise DataError(f"duplicate primary key {frame[key].iloc[first]!r}",
                            file=path, line=first + 2, column=key)
    return frame


def load_tables(paths) -> LoanDataset:
    """Load the four CSV tables.

    ``paths`` is either a directory holding ``customers.csv`` etc., a mapping
    table name -> path, or a sequence of four paths in table order.  Raises
    :class:`DataError` on unreadable input or on a referential-integrity
    violation (other invariants are reported by :func:`validate`).
    """
    if isinstance(paths, (str, os.PathLike)):
        paths = {t: os.path.join(paths, f"{t}.csv") for t in TABLES}
    elif not isinstance(paths, dict):
        paths = dict(zip(TABLES, paths))
    ds = LoanDataset(**{t: _read_table(t, str(paths[t])) for t in TABLES})
    for issue in _integrity_issues(ds):
        table, row, _, message = issue
        raise DataError(message, file=str(paths[table]), line=row + 2)
    return ds


def _format_cell(kind: str, value) -> str:
    if kind in ("date", "optdate"):
        return "" if pd.isna(value) else str(np.datetime64(value, "D"))
    if kind in ("money", "int"):
        return str(int(value))
    return str(value)


def dump_table(ds: LoanDataset, table: str) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    names = [name for name, _ in SCHEMA[table]]
    kinds = [kind for _, kind in SCHEMA[table]]
    writer.writerow(names)
    frame = ds.table(table)
    cols = []
    for name, kind in zip(names, kinds):
        values = frame[name].to_numpy()
        if kind in ("date", "optdate"):
            text = np.datetime_as_string(values.astype("datetime64[D]"), unit="D")
            cols.append(np.where(text == "NaT", "", text).tolist())
        elif kind in ("money", "int"):
            cols.append([str(v) for v in values.tolist()])
        else:
            cols.append([str(v) for v in values])
    writer.writerows(zip(*cols))
    return buf.getvalue()


def write_tables(ds: LoanDataset, directory) -> None:
    os.makedirs(directory, exist_ok=True)
    for table in TABLES:
        with open(os.path.join(directory, f"{table}.csv"), "w", encoding="utf-8", newline="") as fh:
            fh.write(dump_table(ds, table))


# -------------------------------------------------------------------- validation

@dataclass(frozen=True)
class Violation:
    table: str
    row: int  # zero-based row position within the table
    key: str  # record locator, e.g. the contract id
    rule: str


@dataclass
class ValidationReport:
    violations: list = field(default_factory=list)

    def __bool__(self) -> bool:
        return bool(self.violations)

    def __len__(self) -> int:
        return len(self.violations)

    def __iter__(self):
        return iter(self.violations)

    @property
    def ok(self) -> bool:
        return not self.violations

    def rules(self) -> list:
        return [v.rule for v in self.violations]


def _integrity_issues(ds: LoanDataset) -> list:
    issues = []
    cust_ids = set(ds.customers["customer_id"])
    con_ids = set(ds.contracts["contract_id"])
    for i, b in enumerate(ds.contracts["borrower_id"]):
        if b not in cust_ids:
            issues.append(("contracts", i, ds.contracts["contract_id"].iat[i], f"unknown borrower_id {b!r}"))
    for i, (c, g) in enumerate(zip(ds.guarantees["contract_id"], ds.guarantees["guarantor_id"])):
        if c not in con_ids:
            issues.append(("guarantees", i, c, f"guarantee row references unknown contract_id {c!r}"))
        if g not in cust_ids:
            issues.append(("guarantees", i, c, f"unknown guarantor_id {g!r}"))
    for i, c in enumerate(ds.repayments["contract_id"]):
        if c not in con_ids:
            issues.append(("repayments", i, c, f"repayment row references unknown contract_id {c!r}"))
    return issues


def validate(ds: LoanDataset) -> ValidationReport:
    """List every invariant violation.  An empty report means the dataset is valid."""
    out = [Violation(t, r, k, m) for t, r, k, m in _integrity_issues(ds)]
    cu, co, gu, re = ds.customers, ds.contracts, ds.guarantees, ds.repayments

    def flag(table, frame, key_col, mask, rule):
        for i in np.flatnonzero(np.asarray(mask)):
            out.append(Violation(table, int(i), str(frame[key_col].iat[i]), rule))

    flag("customers", cu, "customer_id", cu["customer_id"].duplicated().to_numpy(), "customer_id unique")
    flag("customers", cu, "customer_id", cu["registered_capital"].to_numpy() < 0, "registered_capital >= 0")
    flag("customers", cu, "customer_id", cu["employee_count"].to_numpy() < 0, "employee_count >= 0")
    flag("customers", cu, "customer_id", ~cu["enterprise_scale"].isin(ENTERPRISE_SCALES).to_numpy(),
         "enterprise_scale in {micro, small, medium, large}")

    flag("contracts", co, "contract_id", co["contract_id"].duplicated().to_numpy(), "contract_id unique")
    flag("contracts", co, "contract_id", co["loan_amount"].to_numpy() <= 0, "loan_amount > 0")
    flag("contracts", co, "contract_id", co["term_months"].to_numpy() < 1, "term_months >= 1")

    reg = dict(zip(cu["customer_id"], cu["registration_date"].to_numpy("datetime64[D]")))
    starts = co["start_date"].to_numpy("datetime64[D]")
    early = [b in reg and reg[b] > s for b, s in zip(co["borrower_id"], starts)]
    flag("contracts", co, "contract_id", early, "registration_date <= start_date")

    con_idx = {c: i for i, c in enumerate(co["contract_id"])}
    borrower = co["borrower_id"].to_numpy()
    g_rows = [con_idx.get(c, -1) for c in gu["contract_id"]]
    self_g = [r >= 0 and borrower[r] == g for r, g in zip(g_rows, gu["guarantor_id"])]
    flag("guarantees", gu, "contract_id", self_g, "self-guarantee")
    signed = gu["signed_date"].to_numpy("datetime64[D]")
    late_sign = [r >= 0 and s > starts[r] for r, s in zip(g_rows, signed)]
    flag("guarantees", gu, "contract_id", late_sign, "signed_date <= start_date")

    maturity = ds.maturity_dates
    r_rows = np.array([con_idx.get(c, -1) for c in re["contract_id"]], dtype=np.int64)
    due = re["due_date"].to_numpy("datetime64[D]")
    known = r_rows >= 0
    outside = np.zeros(len(re), dtype=bool)
    if known.any():
        rr = r_rows[known]
        outside[known] = (due[known] < starts[rr]) | (due[known] > maturity[rr])
    flag("repayments", re, "contract_id", outside, "due_date within contract term")
    flag("repayments", re, "contract_id", re["amount_due"].to_numpy() < 0, "amount_due >= 0")
    flag("repayments", re, "contract_id", re["amount_paid"].to_numpy() < 0, "amount_paid >= 0")
    return ValidationReport(out)


# -------------------------------------------------------------------------- join

@dataclass(frozen=True)
class JoinedRecord:
    contract: Contract
    borrower: Customer
    guarantors: tuple
    guarantees: tuple
    repayments: tuple

    @property
    def contract_id(self) -> str:
        return self.contract.contract_id

    @property
    def default_flags(self) -> tuple:
        return tuple(r.default_flag for r in self.repayments)

    @property
    def n_defaults(self) -> int:
        return sum(self.default_flags)

    @property
    def defaulted(self) -> bool:
        return any(self.default_flags)


def _to_date(value):
    if pd.isna(value):
        return None
    return np.datetime64(value, "D").astype(dt.date)


def _rows(frame: pd.DataFrame, table: str, cls) -> list:
    cols = []
    for name, kind in SCHEMA[table]:
        values = frame[name].to_numpy()
        if kind in ("date", "optdate"):
            cols.append([_to_date(v) for v in values.astype("datetime64[D]")])
        elif kind in ("money", "int"):
            cols.append(values.tolist())
        else:
            cols.append(list(values))
    return [cls(*vals) for vals in zip(*cols)]


def join_records(ds: LoanDataset) -> list:
    """One record per contract: borrower profile, guarantors in file order and
    repayments sorted by due date (stable)."""
    customers = {c.customer_id: c for c in _rows(ds.customers, "customers", Customer)}
    by_contract_g: dict = {}
    for g in _rows(ds.guarantees, "guarantees", Guarantee):
        by_contract_g.setdefault(g.contract_id, []).append(g)
    by_contract_r: dict = {}
    for r in _rows(ds.repayments, "repayments", Repayment):
        by_contract_r.setdefault(r.contract_id, []).append(r)
    out = []
    for c in _rows(ds.contracts, "contracts", Contract):
        gs = by_contract_g.get(c.contract_id, [])
        rs = sorted(by_contract_r.get(c.contract_id, []), key=lambda r: r.due_date)
        out.append(JoinedRecord(
            contract=c,
            borrower=customers[c.borrower_id],
            guarantors=tuple(g.guarantor_id for g in gs),
            guarantees=tuple(gs),
            repayments=tuple(rs),
        ))
    return out


def records_to_dataset(records: Sequence[JoinedRecord], extra_customers: Iterable[Customer] = ()) -> LoanDataset:
    """Inverse of :func:`join_records` (customers that only guarantee must be
    supplied through ``extra_customers``)."""
    customers = {}
    for c in extra_customers:
        customers[c.customer_id] = c
    for r in records:
        customers.setdefault(r.borrower.customer_id, r.borrower)
    return LoanDataset.from_records(
        customers=customers.values(),
        contracts=[r.contract for r in records],
        guarantees=[g for r in records for g in r.guarantees],
        repayments=[p for r in records for p in r.repayments],
    )
