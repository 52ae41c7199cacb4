import pandas as pd

from core.bellman_engine import SolveArtifacts
from models.evaluation import SummaryStats
from models.strategy import StrategyKind


def format_summary_stats(kind: StrategyKind, stats: SummaryStats) -> str:
    """
    One line per statistic, for the console.
    """
    return "\n".join(
        [
            f"{kind.str_repr} ({kind.table_label})",
            f"  expected utility  {stats.mean_utility:.4f}",
            f"  var(X_T)          {stats.variance:.4f}",
            f"  q_0.30(X_T)       {stats.quantile_30:.4f}",
            f"  q_0.90(X_T)       {stats.quantile_90:.4f}",
            f"  max(X_T)          {stats.max:.4f}",
            f"  min(X_T)          {stats.min:.4f}",
        ]
    )


def format_comparison(table: pd.DataFrame) -> str:
    return table.to_string(float_format=lambda v: f"{v:.4f}")


def layer_summary_frame(artifacts: SolveArtifacts) -> pd.DataFrame:
    rows = [
        {
            "t": t,
            "design_count": int(layer.values.size),
            "mean_value": float(layer.values.mean()),
            "nonconverged": layer.nonconverged,
            "nonconvergence_rate": layer.nonconverged / layer.values.size,
        }
        for t, layer in sorted(artifacts.layers.items())
    ]
    return pd.DataFrame(rows)


TRACE_COLUMNS = ["t", "design_point", "iteration", "objective", "gamma", "step"]


def trace_frame(artifacts: SolveArtifacts) -> pd.DataFrame:
    """SGDA stall checks of every freshly solved layer, one row per check."""
    rows = [
        {
            "t": t,
            "design_point": index,
            "iteration": row.iteration,
            "objective": row.objective,
            "gamma": row.gamma,
            "step": row.step,
        }
        for t, layer in sorted(artifacts.layers.items())
        for index, checks in sorted(layer.trace.items())
        for row in checks
    ]
    return pd.DataFrame(rows, columns=TRACE_COLUMNS)
