import io
from typing import List, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy.stats import spearmanr

from ...application.domain.entities.importance import CorrelationTable
from ...application.domain.entities.metrics import EvalResult
from ...application.domain.entities.protocol import MultiSourceResult, SubsampleStudyResult, SweepResult
from ...application.domain.errors import ArtifactFormatError

CORRELATION_FORMAT_VERSION = "1.0"

SETTING_LABELS = {"cross_lingual": "CrLing", "multi_lingual": "MulLing"}
SCORE_PAIRS: List[Tuple[str, str]] = [
    ("Unpruned CrLing", "Pruned CrLing"),
    ("Unpruned MulLing", "Pruned MulLing"),
]

ColumnPair = Tuple[str, str]
TRANSFER_COLUMNS = ["SL", "TL", "setting", "ranking rho", "improvement"]


def _cell(value) -> str:
    if isinstance(value, float):
        return "" if np.isnan(value) else f"{value:.4f}"
    return str(value)


class ExportService:
    @staticmethod
    def score_pairs() -> List[ColumnPair]:
        return list(SCORE_PAIRS)

    @staticmethod
    def sweep_frame(results: Sequence[SweepResult], group_by: str = "target") -> pd.DataFrame:
        """One row per (source, target) with unpruned/pruned score pairs per setting, or per k when grouped by k."""
        if group_by == "k":
            rows = []
            for result in results:
                label = SETTING_LABELS[result.setting]
                for entry in result.per_k_scores:
                    rows.append(
                        {
                            "SL": "+".join(result.source_languages),
                            "TL": result.target_language,
                            "k": entry.k,
                            label: entry.score,
                        }
                    )
            frame = pd.DataFrame(rows)
            frame = frame.groupby(["SL", "TL", "k"], sort=True, as_index=False).first()
            for label in SETTING_LABELS.values():
                if label not in frame.columns:
                    frame[label] = np.nan
            return frame[["SL", "TL", "k", "CrLing", "MulLing"]]

        rows = []
        for result in results:
            label = SETTING_LABELS[result.setting]
            rows.append(
                {
                    "SL": "+".join(result.source_languages),
                    "TL": result.target_language,
                    f"Unpruned {label}": result.unpruned_score,
                    f"Pruned {label}": result.best_score,
                }
            )
        frame = pd.DataFrame(rows)
        frame = frame.groupby(["SL", "TL"], sort=False, as_index=False).first()
        for unpruned, pruned in SCORE_PAIRS:
            for column in (unpruned, pruned):
                if column not in frame.columns:
                    frame[column] = np.nan
        order = ["SL", "TL"] if group_by == "source" else ["TL", "SL"]
        frame = frame.sort_values(order, kind="mergesort").reset_index(drop=True)
        columns = ["SL", "TL"] + [column for pair in SCORE_PAIRS for column in pair]
        return frame[columns]

    @staticmethod
    def higher_flags(frame: pd.DataFrame, pairs: Sequence[ColumnPair]) -> pd.DataFrame:
        """Boolean frame marking the higher cell of each unpruned/pruned pair; a tie marks the unpruned cell."""
        flags = pd.DataFrame(False, index=frame.index, columns=frame.columns)
        for unpruned, pruned in pairs:
            both = frame[unpruned].notna() & frame[pruned].notna()
            pruned_higher = both & (frame[pruned] > frame[unpruned])
            flags[pruned] = pruned_higher
            flags[unpruned] = both & ~pruned_higher
        return flags

    @staticmethod
    def to_markdown(frame: pd.DataFrame, pairs: Sequence[ColumnPair] = ()) -> str:
        flags = ExportService.higher_flags(frame, pairs)
        header = "| " + " | ".join(frame.columns) + " |"
        rule = "|" + "|".join("---" for _ in frame.columns) + "|"
        lines = [header, rule]
        for idx, row in frame.iterrows():
            cells = []
            for column in frame.columns:
                text = _cell(row[column])
                cells.append(f"**{text}**" if flags.at[idx, column] and text else text)
            lines.append("| " + " | ".join(cells) + " |")
        return "\n".join(lines) + "\n"

    @staticmethod
    def to_csv(frame: pd.DataFrame, pairs: Sequence[ColumnPair] = ()) -> str:
        flags = ExportService.higher_flags(frame, pairs)
        out = frame.copy()
        for unpruned, pruned in pairs:
            out[f"{pruned} higher"] = flags[pruned].astype(int)
        return out.to_csv(index=False, float_format="%.4f", lineterminator="\n")

    @staticmethod
    def correlation_csv(table: CorrelationTable) -> str:
        frame = pd.DataFrame(list(table.values), index=list(table.languages), columns=list(table.languages))
        body = frame.to_csv(index_label="language", float_format="%.6f", lineterminator="\n")
        header = (
            f"# format_version: {CORRELATION_FORMAT_VERSION}\n"
            f"# task_kind: {table.task_kind}\n"
            f"# heads_compared: {table.heads_compared}\n"
        )
        return header + body

    @staticmethod
    def parse_correlation_csv(text: str) -> CorrelationTable:
        meta = {}
        lines = text.splitlines(keepends=True)
        body_start = 0
        for body_start, line in enumerate(lines):
            if not line.startswith("#"):
                break
            key, _, value = line[1:].partition(":")
            meta[key.strip()] = value.strip()
        version = meta.get("format_version", "")
        if version.split(".")[0] != CORRELATION_FORMAT_VERSION.split(".")[0]:
            raise ArtifactFormatError(f"unsupported correlation format_version {version!r}")
        missing = [key for key in ("task_kind", "heads_compared") if key not in meta]
        if missing:
            raise ArtifactFormatError(f"correlation CSV header lacks {', '.join(missing)}")
        try:
            frame = pd.read_csv(io.StringIO("".join(lines[body_start:])), index_col=0)
            languages = tuple(str(code) for code in frame.index)
            if tuple(str(c) for c in frame.columns) != languages:
                raise ArtifactFormatError("correlation CSV row and column headers differ")
            return CorrelationTable(
                task_kind=meta["task_kind"],
                languages=languages,
                values=tuple(tuple(float(v) for v in row) for row in frame.to_numpy()),
                heads_compared=int(meta["heads_compared"]),
            )
        except ValueError as exc:
            raise ArtifactFormatError(f"malformed correlation CSV ({exc})") from None

    @staticmethod
    def transfer_frame(rows: Sequence[Tuple[SweepResult, float]]) -> pd.DataFrame:
        """One row per single-source sweep: ranking rho between source and target, and best minus unpruned."""
        frame = pd.DataFrame(
            [
                {
                    "SL": result.source_languages[0],
                    "TL": result.target_language,
                    "setting": SETTING_LABELS[result.setting],
                    "ranking rho": rho,
                    "improvement": result.best_score - result.unpruned_score,
                }
                for result, rho in rows
            ],
            columns=TRANSFER_COLUMNS,
        )
        return frame.sort_values(["setting", "TL", "SL"], kind="mergesort").reset_index(drop=True)

    @staticmethod
    def transfer_summary(frame: pd.DataFrame) -> pd.DataFrame:
        """Spearman rho between improvement and ranking rho, per setting; undefined below three pairs or on constant input."""
        rows = []
        for label in SETTING_LABELS.values():
            pairs = frame[(frame["setting"] == label) & frame["ranking rho"].notna()]
            value = np.nan
            if len(pairs) >= 3 and pairs["ranking rho"].nunique() > 1 and pairs["improvement"].nunique() > 1:
                statistic, _ = spearmanr(pairs["ranking rho"], pairs["improvement"])
                value = float(statistic)
            rows.append({"setting": label, "pairs": len(pairs), "rho(improvement, ranking rho)": value})
        return pd.DataFrame(rows)

    @staticmethod
    def summary_comments(summary: pd.DataFrame) -> str:
        lines = []
        for _, row in summary.iterrows():
            value = _cell(row["rho(improvement, ranking rho)"]) or "n/a"
            lines.append(f"# improvement_vs_rho {row['setting']}: {value} over {row['pairs']} pairs\n")
        return "".join(lines)

    @staticmethod
    def multi_source_frame(results: Sequence[MultiSourceResult]) -> pd.DataFrame:
        rows = []
        for result in results:
            row = {"SL": "+".join(result.source_languages), "TL": result.target_language, "FL": result.unpruned_score}
            for heuristic, sweep in result.sweeps.items():
                row[heuristic] = sweep.best_score
            if result.ec_language is not None:
                row["EC source"] = result.ec_language
            rows.append(row)
        return pd.DataFrame(rows)

    @staticmethod
    def subsample_frame(result: SubsampleStudyResult) -> pd.DataFrame:
        return pd.DataFrame(
            [
                {
                    "tenths": row.tenths,
                    "target train": row.target_train_sentences,
                    "Unpruned": row.unpruned_score,
                    "Pruned": row.pruned_score,
                    "best k": row.best_k,
                }
                for row in result.rows
            ]
        )

    @staticmethod
    def eval_line(task_kind: str, result: EvalResult) -> str:
        return f"{task_kind},{result.precision:.4f},{result.recall:.4f},{result.f1:.4f},{result.support}"
