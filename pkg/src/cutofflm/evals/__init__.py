from .mcq import McqItem, McqScore, TaskResult, assemble_prompt, load_mcq_task, run_task, score_mcq
from .constraints import (
    ConstraintItem,
    ConstraintVerdict,
    check_instruction,
    load_constraint_task,
    run_instruction_task,
)

__all__ = [
    "McqItem",
    "McqScore",
    "TaskResult",
    "assemble_prompt",
    "load_mcq_task",
    "run_task",
    "score_mcq",
    "ConstraintItem",
    "ConstraintVerdict",
    "check_instruction",
    "load_constraint_task",
    "run_instruction_task",
]
