import json

import numpy as np
import pandas as pd
import plotly.graph_objects as go
import pytest

from pganet.grid_graph import BENCH_COLUMNS
from pganet.model import training_log_columns
from utils.export import export_config, export_dataframe, export_report
from utils.visualization import (
    create_attention_heatmap, create_speed_figure, create_sweep_figure,
    create_training_figure, save_figure
)


@pytest.fixture
def bench():
    return pd.DataFrame(
        [[128, "four", 1e-4, 2e-3, 20.0], [512, "four", 3e-4, 3e-2, 100.0],
         [128, "eight", 2e-4, 3e-3, 15.0], [512, "eight", 5e-4, 4e-2, 80.0]],
        columns=BENCH_COLUMNS
    )


def test_export_dataframe_csv(tmp_path):
    frame = pd.DataFrame({"row": [0, 1], "col": [1, 0], "weight": [1 / 3, 2 / 3]})
    content = export_dataframe(frame, tmp_path / "a.csv")
    assert content.decode().splitlines()[0] == "row,col,weight"
    assert (tmp_path / "a.csv").read_bytes() == content
    np.testing.assert_allclose(pd.read_csv(tmp_path / "a.csv")["weight"], frame["weight"], rtol=1e-9)


def test_export_dataframe_fixed_decimals(bench):
    lines = export_dataframe(bench, float_format="%.6f").decode().splitlines()
    assert lines[1] == "128,four,0.000100,0.002000,20.000000"


def test_export_dataframe_json():
    records = json.loads(export_dataframe(pd.DataFrame({"metric": ["mAP"], "value": [0.25]}), format="json"))
    assert records == [{"metric": "mAP", "value": 0.25}]


def test_export_dataframe_rejects_unknown_format():
    with pytest.raises(ValueError):
        export_dataframe(pd.DataFrame({"a": [1]}), format="xlsx")


def test_export_config_is_json():
    assert json.loads(export_config({"depth": 2, "seeds": [0, 1]})) == {"depth": 2, "seeds": [0, 1]}


def test_report_sections():
    tables = {"Retrieval": pd.DataFrame({"metric": ["mAP"], "value": [0.123456]}), "Empty": pd.DataFrame()}
    report = export_report("train run", tables, {"depth": 2})
    assert report.startswith("# train run")
    assert "## Retrieval" in report
    assert "| mAP | 0.1235 |" in report
    assert "No rows." in report
    assert '"depth": 2' in report


def test_speed_figure(bench):
    fig = create_speed_figure(bench)
    assert isinstance(fig, go.Figure)
    assert len(fig.data) == 6
    assert fig.layout.yaxis.type == "log"


def test_sweep_figure():
    sweep = pd.DataFrame({"setting": [0, 0, 3, 3], "seed": [0, 1, 0, 1],
                          "mAP": [0.5, 0.6, 0.7, 0.8], "rank1": [0.4, 0.5, 0.9, 1.0]})
    fig = create_sweep_figure(sweep, title="layers sweep")
    assert [trace.name for trace in fig.data] == ["mAP", "rank1"]
    assert list(fig.data[0].x) == ["0", "3"]
    np.testing.assert_allclose(fig.data[0].y, [0.55, 0.75])


def test_training_figure_plots_alphas():
    log = pd.DataFrame([[0, 2.0, 1.5, 0.4, 0.1, 0.25, 0.5, 0.5], [1, 1.5, 1.2, 0.3, 0.1, 0.5, 0.49, 0.52]],
                       columns=training_log_columns(2))
    fig = create_training_figure(log)
    names = [trace.name for trace in fig.data]
    assert "alpha_0" in names and "alpha_1" in names and "train_acc" in names


def test_attention_heatmap_leaves_non_edges_blank():
    frame = pd.DataFrame({"row": [0, 1], "col": [1, 0], "weight": [1.0, 1.0]})
    z = np.array(create_attention_heatmap(frame, 3).data[0].z, dtype=float)
    assert z[0, 1] == 1.0
    assert np.isnan(z[2, 2])


def test_save_figure_writes_html(tmp_path, bench):
    path = save_figure(create_speed_figure(bench), tmp_path / "speed.html")
    assert path.read_text().lstrip().lower().startswith("<html")
