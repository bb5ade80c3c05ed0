"""Report writers and figures for run artifacts."""

from .visualization import (
    create_speed_figure,
    create_sweep_figure,
    create_training_figure,
    create_attention_heatmap,
    save_figure
)
from .export import export_dataframe, export_config, export_report

__all__ = [
    'create_speed_figure', 'create_sweep_figure', 'create_training_figure',
    'create_attention_heatmap', 'save_figure',
    'export_dataframe', 'export_config', 'export_report'
]
