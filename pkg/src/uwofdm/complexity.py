"""Complex-multiplication-equivalent (CME) cost accounting.

Cost model: complex multiplications and divisions cost 1, real ones 1/4,
additions are free.  Hermitian positive-definite solves are charged as a
Cholesky factorization plus one forward and one backward substitution per
right-hand side.  All arithmetic is exact (:class:`fractions.Fraction`);
rounding happens only for display.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

from .errors import UnknownKind

F = Fraction

#: Table row order; each row lists the estimator kinds it covers.
ROWS: dict[str, tuple[str, ...]] = {
    "CI": ("CI",),
    "TDW": ("TDW",),
    "LMMSE_wiener": ("LMMSE_wiener",),
    "direct": ("BLUE_direct", "LMMSE_direct"),
    "reduced": ("BLUE_reduced", "LMMSE_reduced"),
    "sequential": ("LMMSE_sequential",),
}
_ALIASES = {kind: row for row, kinds in ROWS.items() for kind in kinds}
_ALIASES.update({row: row for row in ROWS})


@dataclass(frozen=True)
class CmeModel:
    complex_mul: Fraction = F(1)
    complex_div: Fraction = F(1)
    real_mul: Fraction = F(1, 4)
    real_div: Fraction = F(1, 4)
    addition: Fraction = F(0)

    @staticmethod
    def cholesky(m: int) -> Fraction:
        return F(m**3, 6)

    @staticmethod
    def substitution(m: int) -> Fraction:
        """One forward or backward substitution."""
        return F(m**2, 2) + F(m, 2)

    def solve_hpd(self, m: int, n_b: int) -> Fraction:
        """``A^{-1} B`` for Hermitian PD ``A`` (m x m) and ``B`` (m x n_b)."""
        return self.cholesky(m) + 2 * n_b * self.substitution(m)

    @staticmethod
    def fft(N: int) -> Fraction:
        return F(N, 2) * int(math.log2(N))


MODEL = CmeModel()


def canonical_row(kind: str) -> str:
    try:
        return _ALIASES[kind]
    except KeyError:
        raise UnknownKind(f"no cost formula for {kind!r}") from None


def _check(*dims: int) -> None:
    if any(d <= 0 for d in dims):
        raise ValueError("dimensions must be positive")


def cme_determination(kind: str, N: int, N_d: int, N_r: int, model: CmeModel = MODEL) -> Fraction:
    """CME count to compute the equalizer once per channel estimate."""
    _check(N, N_d, N_r)
    row = canonical_row(kind)
    m = model
    if row == "CI":
        return N_d * m.complex_div
    if row == "TDW":
        return (N_d + N_r) * m.complex_div
    if row == "direct":
        x1 = N_d * N_r  # H_s G_s = [H_s1; H_s2 T]
        x2 = F(N_d**2 * N_r, 2) + N_d * N_r + N_d + N_r  # Hermitian X1^H X1
        return x1 + x2 + m.solve_hpd(N_d, N_d + N_r)
    if row == "reduced":
        diag_inverses = F(5, 4) * (N_d + N_r)
        d1_th = F(N_d * N_r, 2)
        t_d1_th = F(N_d * N_r**2, 2) + F(N_d * N_r, 2)
        inner_solve = m.solve_hpd(N_r, N_d)
        lemma_product = N_d**2 * N_r
        final = N_d * N_r + N_d**2 * N_r + N_d**2
        return diag_inverses + d1_th + t_d1_th + inner_solve + lemma_product + final
    if row == "sequential":
        gains_head = N_d * N_r + N_d + 2 * N_d * m.real_div
        gains_tail = N_d * N_r + N_r**2 + N_r + N_r * m.real_mul + 2 * N_r * m.real_div
        mse_head = N_d * N_r**2 + N_d * N_r + N_d * m.real_div
        mse_tail = N_d**2 * N_r + 2 * N_d * N_r**2 + N_r**3 + N_d * N_r + N_r**2
        return gains_head + gains_tail + mse_head + mse_tail
    # Wiener-smoother form: only the aggregate count is available
    return (
        F(7, 6) * N_d**3 + F(5, 2) * N_d**2 * N_r + 2 * N_d * N_r**2 + F(1, 6) * N_r**3
        + N_d**2 + F(3, 2) * N_d * N_r + F(5, 2) * N_d + F(5, 2) * N_r
    )


def cme_per_symbol(kind: str, N: int, N_d: int, N_r: int, model: CmeModel = MODEL) -> Fraction:
    """CME count to estimate the data of one received symbol, receive FFT included."""
    _check(N, N_d, N_r)
    row = canonical_row(kind)
    base = model.fft(N)
    if row == "CI":
        return base + N_d
    if row == "TDW":
        return base + 2 * model.fft(N) + N_d + N_r
    if row == "sequential":
        return base + 2 * N_d * N_r + N_r**2 + N_d + N_r
    return base + N_d * (N_d + N_r)


def round_half_up(x: Fraction) -> int:
    return math.floor(x + F(1, 2))


@dataclass(frozen=True)
class CmeReport:
    kind: str
    determination_cme: Fraction
    per_symbol_cme: Fraction
    N: int
    N_d: int
    N_r: int

    @property
    def determination_display(self) -> int:
        return round_half_up(self.determination_cme)

    @property
    def per_symbol_display(self) -> int:
        return round_half_up(self.per_symbol_cme)


def table2_report(config=None, N: int = 64, N_d: int = 36, N_r: int = 16) -> list[CmeReport]:
    """One report per estimator family, in table order."""
    if config is not None:
        N, N_d, N_r = config.N, config.N_d, config.N_r
    return [
        CmeReport(row, cme_determination(row, N, N_d, N_r), cme_per_symbol(row, N, N_d, N_r), N, N_d, N_r)
        for row in ROWS
    ]


def format_table(reports: list[CmeReport]) -> str:
    header = ("kind", "determination_cme", "per_symbol_cme")
    rows = [(r.kind, str(r.determination_display), str(r.per_symbol_display)) for r in reports]
    widths = [max(len(x) for x in col) for col in zip(header, *rows)]
    fmt = "  ".join(f"{{:<{widths[0]}}}" if i == 0 else f"{{:>{w}}}" for i, w in enumerate(widths))
    return "\n".join(fmt.format(*r) for r in [header, *rows])


def format_csv(reports: list[CmeReport]) -> str:
    lines = ["kind,determination_cme,per_symbol_cme"]
    lines += [f"{r.kind},{r.determination_display},{r.per_symbol_display}" for r in reports]
    return "\n".join(lines) + "\n"
