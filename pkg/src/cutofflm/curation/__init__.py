from .types import (
    FinancePromptRecord,
    InstructionExample,
    RemovalReport,
    load_examples,
    load_finance_records,
    load_mix,
    save_examples,
)
from .classify import EndpointClassifier, RuleBasedClassifier, classify_time_sensitivity, filter_dataset
from .finance import FinancePrompt, build_finance_prompts, generate_teacher_examples
from .mix import assemble_year_mix, find_leakage_violations

__all__ = [
    "FinancePromptRecord",
    "InstructionExample",
    "RemovalReport",
    "load_examples",
    "load_finance_records",
    "load_mix",
    "save_examples",
    "EndpointClassifier",
    "RuleBasedClassifier",
    "classify_time_sensitivity",
    "filter_dataset",
    "FinancePrompt",
    "build_finance_prompts",
    "generate_teacher_examples",
    "assemble_year_mix",
    "find_leakage_violations",
]
