"""
Evaluation Module - evaluation, ablation, comparison and reports
"""
from .commands import register_evaluation_commands
from .report import report
from .services import ablate_weight_ratio, compare_variants, evaluate

__all__ = ['ablate_weight_ratio', 'compare_variants', 'evaluate', 'register_evaluation_commands', 'report']
