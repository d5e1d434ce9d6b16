from pydantic import BaseModel, ConfigDict, Field

from .corpus import TaskKind


class EvalResult(BaseModel):
    model_config = ConfigDict(frozen=True)

    precision: float = Field(ge=0.0, le=1.0)
    recall: float = Field(ge=0.0, le=1.0)
    f1: float = Field(ge=0.0, le=1.0)
    support: int = Field(ge=0)
    task_kind: TaskKind

    @classmethod
    def from_counts(cls, correct: int, predicted: int, gold: int, task_kind: TaskKind) -> "EvalResult":
        """Micro scores. Nothing predicted against nothing gold is a perfect match; any other empty denominator scores 0."""
        if predicted == 0 and gold == 0:
            return cls(precision=1.0, recall=1.0, f1=1.0, support=0, task_kind=task_kind)
        precision = correct / predicted if predicted else 0.0
        recall = correct / gold if gold else 0.0
        f1 = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
        return cls(precision=precision, recall=recall, f1=f1, support=gold, task_kind=task_kind)
