"""Numerical analysis: retention tables, paired t-tests, correlations,
per-token CE summaries, epoch selection, curve normalization, reports.

Everything here is a pure function over in-memory data. The t-distribution
p-value is computed by adaptive quadrature of the density rather than a
table lookup, so the module needs nothing beyond the stdlib.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from decimal import Decimal, ROUND_HALF_UP
from pathlib import Path
from typing import Sequence

from .errors import ContractError, DegenerateError

CATEGORIES = ("semantic", "procedural", "episodic", "overall")


def fmt1(x: float) -> str:
    """Format at one decimal with half-up rounding (table convention)."""
    return str(Decimal(repr(x)).quantize(Decimal("0.1"), rounding=ROUND_HALF_UP))


def mean_se(values: Sequence[float]) -> tuple[float, float | None]:
    """Unweighted mean and standard error (sample sd / sqrt(n)).

    With a single value the SE is undefined and returned as None.
    """
    if not values:
        raise ContractError("mean_se of empty list")
    n = len(values)
    mean = math.fsum(values) / n
    if n < 2:
        return mean, None
    var = math.fsum((v - mean) ** 2 for v in values) / (n - 1)
    return mean, math.sqrt(var) / math.sqrt(n)


def _t_pdf(x: float, df: int) -> float:
    c = math.exp(
        math.lgamma((df + 1) / 2) - math.lgamma(df / 2)
    ) / math.sqrt(df * math.pi)
    return c * (1 + x * x / df) ** (-(df + 1) / 2)


def _adaptive_simpson(f, a: float, b: float, tol: float) -> float:
    def simpson(fa, fm, fb, a, b):
        return (b - a) / 6 * (fa + 4 * fm + fb)

    def recurse(a, b, fa, fm, fb, whole, tol, depth):
        m = (a + b) / 2
        lm, rm = (a + m) / 2, (m + b) / 2
        flm, frm = f(lm), f(rm)
        left = simpson(fa, flm, fm, a, m)
        right = simpson(fm, frm, fb, m, b)
        if depth > 60 or abs(left + right - whole) < 15 * tol:
            return left + right + (left + right - whole) / 15
        return recurse(a, m, fa, flm, fm, left, tol / 2, depth + 1) + recurse(
            m, b, fm, frm, fb, right, tol / 2, depth + 1
        )

    fa, fb = f(a), f(b)
    m = (a + b) / 2
    fm = f(m)
    return recurse(a, b, fa, fm, fb, simpson(fa, fm, fb, a, b), tol, 0)


def t_sf(t: float, df: int, tol: float = 1e-12) -> float:
    """One-sided upper tail P(T >= t) of the t distribution, by quadrature."""
    t = abs(t)
    if t == 0:
        return 0.5
    body = _adaptive_simpson(lambda x: _t_pdf(x, df), 0.0, t, tol)
    tail = 0.5 - body
    if tail < 1e-10:
        # integrate the tail directly on a compactified domain for accuracy
        tail = _adaptive_simpson(
            lambda u: _t_pdf(t / u, df) * t / (u * u), 1e-12, 1.0, tol
        )
    return max(tail, 0.0)


def paired_t(a: Sequence[float], b: Sequence[float]) -> tuple[float, int, float]:
    """Paired t-test on differences d = b - a. Returns (t, df, two-sided p)."""
    if len(a) != len(b):
        raise ContractError("paired_t requires equal-length samples")
    n = len(a)
    if n < 2:
        raise ContractError("paired_t requires at least 2 pairs")
    d = [bi - ai for ai, bi in zip(a, b)]
    mean_d = math.fsum(d) / n
    var_d = math.fsum((x - mean_d) ** 2 for x in d) / (n - 1)
    if var_d == 0:
        raise DegenerateError("paired differences have zero variance")
    t = mean_d / (math.sqrt(var_d) / math.sqrt(n))
    df = n - 1
    p = 2 * t_sf(abs(t), df)
    return t, df, min(p, 1.0)


def pearson(x: Sequence[float], y: Sequence[float]) -> float:
    if len(x) != len(y):
        raise ContractError("pearson requires equal-length samples")
    n = len(x)
    if n < 2:
        raise ContractError("pearson requires at least 2 points")
    mx = math.fsum(x) / n
    my = math.fsum(y) / n
    sxy = math.fsum((xi - mx) * (yi - my) for xi, yi in zip(x, y))
    sxx = math.fsum((xi - mx) ** 2 for xi in x)
    syy = math.fsum((yi - my) ** 2 for yi in y)
    if sxx == 0 or syy == 0:
        raise DegenerateError("pearson input has zero variance")
    r = sxy / math.sqrt(sxx * syy)
    return max(-1.0, min(1.0, r))


@dataclass(frozen=True)
class CEStats:
    epoch: int
    mean_ce: float
    median_ce: float
    p90_ce: float
    token_count: int


def ce_stats(token_ces: Sequence[float], epoch: int) -> CEStats:
    """Mean / median / 90th-percentile summary of a per-token CE distribution.

    Median averages the central pair on even length; p90 is nearest-rank
    (the ceil(0.9 n)-th order statistic).
    """
    if not token_ces:
        raise ContractError("ce_stats of empty list")
    if any(v < 0 for v in token_ces):
        raise ContractError("CE values must be non-negative")
    s = sorted(token_ces)
    n = len(s)
    mean = math.fsum(s) / n
    median = s[n // 2] if n % 2 == 1 else (s[n // 2 - 1] + s[n // 2]) / 2
    p90 = s[math.ceil(0.9 * n) - 1]
    return CEStats(epoch=epoch, mean_ce=mean, median_ce=median, p90_ce=p90, token_count=n)


@dataclass
class EpochSweep:
    fail_rates: dict[int, float] = field(default_factory=dict)
    ce: dict[int, CEStats] = field(default_factory=dict)

    @property
    def selected_epoch(self) -> int:
        return select_epoch(self.fail_rates)


def select_epoch(fail_rates: dict[int, float]) -> int:
    """Epoch minimizing fail rate; ties break toward the earliest epoch."""
    if not fail_rates:
        raise ContractError("select_epoch with no epochs")
    return min(sorted(fail_rates), key=lambda e: fail_rates[e])


def normalize_curve(values: Sequence[float]) -> list[float]:
    """Min/max-normalize a curve to [0, 1]."""
    lo, hi = min(values), max(values)
    if hi <= lo:
        raise DegenerateError("cannot normalize a constant curve")
    return [(v - lo) / (hi - lo) for v in values]


def gap_recovery(floor: float, ceiling: float, value: float) -> float:
    """Fraction of the floor-to-ceiling gap recovered by ``value``."""
    if ceiling <= floor:
        raise DegenerateError("ceiling must exceed floor")
    return (value - floor) / (ceiling - floor)


# ---------------------------------------------------------------------------
# report rendering


@dataclass
class RetentionTable:
    """Condition -> category -> (mean %, se %) across n conversations."""

    rows: dict[str, dict[str, tuple[float, float | None]]]
    n: int


def retention_table(
    per_conversation: dict[str, dict[str, dict[str, float]]]
) -> RetentionTable:
    """Aggregate per-conversation accuracies into mean +/- SE rows.

    ``per_conversation[condition][conversation_id][category] -> accuracy %``.
    Categories absent for a conversation are skipped for that cell.
    """
    rows: dict[str, dict[str, tuple[float, float | None]]] = {}
    n = 0
    for cond, by_conv in per_conversation.items():
        n = max(n, len(by_conv))
        row: dict[str, tuple[float, float | None]] = {}
        for cat in CATEGORIES:
            vals = [
                acc[cat]
                for acc in by_conv.values()
                if cat in acc and acc[cat] is not None
            ]
            if vals:
                row[cat] = mean_se(vals)
        rows[cond] = row
    return RetentionTable(rows=rows, n=n)


def emit_report(
    out_dir: Path,
    per_conversation: dict[str, dict[str, dict[str, float]]],
    *,
    sweep: EpochSweep | None = None,
    floor_condition: str = "no_context",
    ceiling_condition: str = "full_context",
    compare: tuple[str, str] | None = None,
) -> dict[str, Path]:
    """Write the retention table, per-conversation table, epoch-sweep CSV,
    and a summary document. Missing conditions render as explicit gaps.

    ``compare`` names (baseline_condition, treatment_condition) for the
    paired t-test over per-conversation overall accuracies.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written: dict[str, Path] = {}

    table = retention_table(per_conversation)
    ret_path = out_dir / "retention_table.csv"
    with ret_path.open("w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["condition"] + [f"{c}_{k}" for c in CATEGORIES for k in ("mean", "se")])
        for cond, row in table.rows.items():
            cells = []
            for cat in CATEGORIES:
                if cat in row:
                    m, se = row[cat]
                    cells += [fmt1(m), fmt1(se) if se is not None else "absent"]
                else:
                    cells += ["absent", "absent"]
            w.writerow([cond] + cells)
    written["retention_table"] = ret_path

    pc_path = out_dir / "per_conversation.csv"
    with pc_path.open("w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["conversation", "condition"] + list(CATEGORIES))
        conv_ids = sorted({c for by in per_conversation.values() for c in by})
        for conv in conv_ids:
            for cond, by_conv in per_conversation.items():
                acc = by_conv.get(conv)
                if acc is None:
                    w.writerow([conv, cond] + ["absent"] * len(CATEGORIES))
                else:
                    w.writerow(
                        [conv, cond]
                        + [
                            fmt1(acc[cat]) if acc.get(cat) is not None else "absent"
                            for cat in CATEGORIES
                        ]
                    )
    written["per_conversation"] = pc_path

    if sweep is not None and sweep.fail_rates:
        sweep_path = out_dir / "epoch_sweep.csv"
        epochs = sorted(sweep.fail_rates)
        fail = [sweep.fail_rates[e] for e in epochs]
        means = [sweep.ce[e].mean_ce for e in epochs if e in sweep.ce]
        medians = [sweep.ce[e].median_ce for e in epochs if e in sweep.ce]
        have_ce = len(means) == len(epochs)

        def norm_or_blank(vals):
            try:
                return normalize_curve(vals)
            except DegenerateError:
                return [""] * len(vals)

        nfail = norm_or_blank(fail)
        nmean = norm_or_blank(means) if have_ce else []
        nmedian = norm_or_blank(medians) if have_ce else []
        with sweep_path.open("w", newline="") as f:
            w = csv.writer(f)
            w.writerow(
                [
                    "epoch", "fail_rate", "mean_ce", "median_ce", "p90_ce",
                    "fail_rate_norm", "mean_ce_norm", "median_ce_norm",
                ]
            )
            for i, e in enumerate(epochs):
                stats = sweep.ce.get(e)
                w.writerow(
                    [
                        e,
                        fail[i],
                        stats.mean_ce if stats else "absent",
                        stats.median_ce if stats else "absent",
                        stats.p90_ce if stats else "absent",
                        nfail[i],
                        nmean[i] if have_ce else "absent",
                        nmedian[i] if have_ce else "absent",
                    ]
                )
        written["epoch_sweep"] = sweep_path

    summary_path = out_dir / "summary.md"
    lines = ["# Run summary", "", f"Conversations: n={table.n}", ""]
    for cond in per_conversation:
        row = table.rows.get(cond, {})
        if "overall" in row:
            m, se = row["overall"]
            se_s = fmt1(se) if se is not None else "n/a"
            lines.append(f"- {cond}: overall {fmt1(m)} +/- {se_s}")
        else:
            lines.append(f"- {cond}: absent")
    if compare is not None:
        base, treat = compare
        base_by = per_conversation.get(base, {})
        treat_by = per_conversation.get(treat, {})
        shared = sorted(set(base_by) & set(treat_by))
        if len(shared) >= 2:
            a = [base_by[c]["overall"] for c in shared]
            b = [treat_by[c]["overall"] for c in shared]
            try:
                t, df, p = paired_t(a, b)
                lines += [
                    "",
                    f"Paired t-test ({treat} vs {base}): "
                    f"t({df}) = {t:.2f}, p = {p:.3g}",
                ]
            except DegenerateError:
                lines += ["", f"Paired t-test ({treat} vs {base}): degenerate"]
        else:
            lines += ["", f"Paired t-test ({treat} vs {base}): absent"]
    floor_row = table.rows.get(floor_condition, {}).get("overall")
    ceil_row = table.rows.get(ceiling_condition, {}).get("overall")
    for cond in per_conversation:
        if cond in (floor_condition, ceiling_condition):
            continue
        val = table.rows.get(cond, {}).get("overall")
        if floor_row and ceil_row and val and ceil_row[0] > floor_row[0]:
            frac = gap_recovery(floor_row[0], ceil_row[0], val[0])
            lines.append(
                f"Gap recovery ({cond}): {frac:.3f} ({fmt1(frac * 100)}%)"
            )
    if sweep is not None and sweep.fail_rates:
        lines.append(f"Selected epoch: {sweep.selected_epoch}")
        if len(sweep.fail_rates) >= 2 and len(sweep.ce) == len(sweep.fail_rates):
            epochs = sorted(sweep.fail_rates)
            fail = [sweep.fail_rates[e] for e in epochs]
            try:
                r_med = pearson([sweep.ce[e].median_ce for e in epochs], fail)
                r_mean = pearson([sweep.ce[e].mean_ce for e in epochs], fail)
                lines.append(f"Fail-rate correlation: median CE r={r_med:+.3f}, mean CE r={r_mean:+.3f}")
            except DegenerateError:
                pass
    summary_path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    written["summary"] = summary_path
    return written
