"""Schema validation and rendering behavior on synthetic tables."""

import json

import pytest

from nearbeam_figures.cli import main
from nearbeam_figures.plots import (
    CRB_SWEEP_HEADER,
    TRACK_HEADER,
    PlotSpec,
    SchemaError,
    build_figure,
    read_table,
    render,
)


def write_crb_csv(path, rows=3):
    lines = [",".join(CRB_SWEEP_HEADER)]
    for i in range(rows):
        r = 1.0 + i
        lines.append(f"{r},{0.01 / r},{0.1 * r},{0.05 / r},{0.2 * r},10.0,0")
    path.write_text("\n".join(lines) + "\n")
    return path


def write_track_csv(path, rows=4):
    lines = [",".join(TRACK_HEADER)]
    for i in range(rows):
        state = [1.2 + 0.01 * i, 8.0 + 0.1 * i, 1.0, 0.5]
        row = [float(i)]
        for block_jitter in (0.0, 1e-3, 2e-3, 5e-4):  # true, est, pred, post
            row.extend(v + block_jitter for v in state)
        row.extend([1e-4, 1e-2, 0.1, 0.1])  # rcrb columns
        row.extend([256.0, 10.0, 10.1, 0.01, 0])  # comm metrics
        lines.append(",".join(repr(v) if isinstance(v, float) else str(v) for v in row))
    path.write_text("\n".join(lines) + "\n")
    return path


class TestSchemaValidation:
    def test_missing_column_is_named(self, tmp_path):
        p = write_crb_csv(tmp_path / "crb_sweep.csv")
        text = p.read_text().splitlines()
        cols = text[0].split(",")
        drop = cols.index("rcrb_vtheta_mps")
        mutated = [",".join(c for i, c in enumerate(line.split(",")) if i != drop) for line in text]
        p.write_text("\n".join(mutated) + "\n")
        with pytest.raises(SchemaError, match="rcrb_vtheta_mps"):
            read_table(p, CRB_SWEEP_HEADER)

    def test_renamed_column_is_named(self, tmp_path):
        p = write_track_csv(tmp_path / "track.csv")
        text = p.read_text()
        p.write_text(text.replace("post_r_m", "post_range_m", 1))
        with pytest.raises(SchemaError, match="post_r_m"):
            read_table(p, TRACK_HEADER)

    def test_reordered_columns_rejected(self, tmp_path):
        p = write_crb_csv(tmp_path / "crb_sweep.csv")
        lines = p.read_text().splitlines()
        cols = lines[0].split(",")
        cols[0], cols[1] = cols[1], cols[0]
        lines[0] = ",".join(cols)
        p.write_text("\n".join(lines) + "\n")
        with pytest.raises(SchemaError, match="order"):
            read_table(p, CRB_SWEEP_HEADER)

    def test_zero_byte_file_rejected(self, tmp_path):
        p = tmp_path / "crb_sweep.csv"
        p.write_text("")
        with pytest.raises(SchemaError, match="header"):
            read_table(p, CRB_SWEEP_HEADER)

    def test_missing_file_is_schema_error(self, tmp_path):
        with pytest.raises(SchemaError):
            read_table(tmp_path / "nope.csv", CRB_SWEEP_HEADER)

    def test_ragged_row_rejected(self, tmp_path):
        p = write_crb_csv(tmp_path / "crb_sweep.csv")
        p.write_text(p.read_text() + "1.0,2.0\n")
        with pytest.raises(SchemaError, match=":5"):
            read_table(p, CRB_SWEEP_HEADER)

    def test_unknown_kind_rejected(self, tmp_path):
        with pytest.raises(SchemaError, match="kind"):
            PlotSpec("pie-chart", (tmp_path / "a.csv",), tmp_path / "o.png")

    def test_input_count_bounds(self, tmp_path):
        paths = tuple(tmp_path / f"{i}.csv" for i in range(3))
        with pytest.raises(SchemaError, match="one or two"):
            PlotSpec("rcrb-panels", paths, tmp_path / "o.png")
        with pytest.raises(SchemaError, match="one or two"):
            PlotSpec("rcrb-panels", (), tmp_path / "o.png")


class TestRendering:
    def test_each_kind_writes_an_image(self, tmp_path):
        crb = write_crb_csv(tmp_path / "crb_sweep.csv")
        track = write_track_csv(tmp_path / "track.csv")
        for kind, src in (
            ("rcrb-panels", crb),
            ("trajectory-xy", track),
            ("velocity-components", track),
        ):
            out = render(PlotSpec(kind, (src,), tmp_path / f"{kind}.png"))
            assert out.exists() and out.stat().st_size > 0

    def test_header_only_csv_renders_empty_axes(self, tmp_path):
        p = tmp_path / "track.csv"
        p.write_text(",".join(TRACK_HEADER) + "\n")
        fig = build_figure(PlotSpec("trajectory-xy", (p,), tmp_path / "o.png"))
        assert all(not ax.lines for ax in fig.axes)
        assert render(PlotSpec("trajectory-xy", (p,), tmp_path / "o.png")).exists()

    def test_title_carries_config_hash_from_summary(self, tmp_path):
        crb = write_crb_csv(tmp_path / "crb_sweep.csv")
        (tmp_path / "summary.json").write_text(json.dumps({"config_hash": "deadbeef" * 8}))
        fig = build_figure(PlotSpec("rcrb-panels", (crb,), tmp_path / "o.png"))
        assert "deadbeefdead" in fig.get_suptitle()

    def test_title_survives_missing_summary(self, tmp_path):
        crb = write_crb_csv(tmp_path / "crb_sweep.csv")
        fig = build_figure(PlotSpec("rcrb-panels", (crb,), tmp_path / "o.png"))
        assert fig.get_suptitle() == "rcrb-panels"

    def test_second_input_overlays(self, tmp_path):
        a = write_track_csv(tmp_path / "a.csv")
        b = write_track_csv(tmp_path / "b.csv")
        fig1 = build_figure(PlotSpec("trajectory-xy", (a,), tmp_path / "o.png"))
        fig2 = build_figure(PlotSpec("trajectory-xy", (a, b), tmp_path / "o.png"))
        assert len(fig2.axes[0].lines) > len(fig1.axes[0].lines)

    def test_inputs_never_modified(self, tmp_path):
        crb = write_crb_csv(tmp_path / "crb_sweep.csv")
        before = crb.read_bytes()
        render(PlotSpec("rcrb-panels", (crb,), tmp_path / "o.png"))
        assert crb.read_bytes() == before


class TestCli:
    def test_renders_and_exits_zero(self, tmp_path, capsys):
        crb = write_crb_csv(tmp_path / "crb_sweep.csv")
        out = tmp_path / "fig.png"
        code = main(["--kind", "rcrb-panels", "--in", str(crb), "--out", str(out)])
        assert code == 0
        assert out.exists()

    def test_mutated_header_exits_nonzero_naming_column(self, tmp_path, capsys):
        p = write_track_csv(tmp_path / "track.csv")
        p.write_text(p.read_text().replace("true_vr_mps", "true_speed", 1))
        code = main(["--kind", "velocity-components", "--in", str(p), "--out", str(tmp_path / "o.png")])
        assert code == 2
        assert "true_vr_mps" in capsys.readouterr().err

    def test_empty_csv_exits_zero(self, tmp_path):
        p = tmp_path / "crb_sweep.csv"
        p.write_text(",".join(CRB_SWEEP_HEADER) + "\n")
        out = tmp_path / "o.png"
        assert main(["--kind", "rcrb-panels", "--in", str(p), "--out", str(out)]) == 0
        assert out.exists()

    def test_missing_input_exits_two(self, tmp_path, capsys):
        code = main(["--kind", "rcrb-panels", "--in", str(tmp_path / "no.csv"), "--out", str(tmp_path / "o.png")])
        assert code == 2
        assert "no.csv" in capsys.readouterr().err

    def test_linear_flag_switches_scale(self, tmp_path):
        crb = write_crb_csv(tmp_path / "crb_sweep.csv")
        fig_log = build_figure(PlotSpec("rcrb-panels", (crb,), tmp_path / "o.png"))
        fig_lin = build_figure(PlotSpec("rcrb-panels", (crb,), tmp_path / "o.png", log_scale=False))
        assert fig_log.axes[0].get_xscale() == "log"
        assert fig_lin.axes[0].get_xscale() == "linear"
