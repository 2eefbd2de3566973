# ------------------ PDF Generation Functions ------------------
import io
import logging
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
from reportlab.lib import colors  # noqa: E402
from reportlab.lib.pagesizes import letter  # noqa: E402
from reportlab.lib.styles import ParagraphStyle, getSampleStyleSheet  # noqa: E402
from reportlab.lib.units import inch  # noqa: E402
from reportlab.platypus import Image, Paragraph, SimpleDocTemplate, Spacer, Table, TableStyle  # noqa: E402

from analysis import error_norms, h_series  # noqa: E402

logger = logging.getLogger(__name__)

PARAM_NAMES = ("a", "b", "c", "eps")


def sanitize_text(text):
    """Replace characters that can't be encoded in latin-1 with spaces"""
    if text is None:
        return ""
    return "".join(ch if ch.encode("latin-1", errors="ignore") else " " for ch in str(text))


def _fmt(value):
    if value is None:
        return "-"
    if isinstance(value, str):
        return value
    return f"{value:.6g}"


# ------------------ Static Charts ------------------
def _png(fig):
    buffer = io.BytesIO()
    fig.savefig(buffer, format="png", bbox_inches="tight", dpi=120)
    plt.close(fig)
    buffer.seek(0)
    return buffer


def error_chart_png(times, theta_error, param_error=None):
    fig, ax = plt.subplots(figsize=(6, 2.6))
    ax.semilogy(times, theta_error, label="theta error")
    if param_error is not None:
        ax.semilogy(times, param_error, label="(a, b, c, eps) error")
    ax.set_xlabel("t")
    ax.legend(fontsize=8)
    ax.grid(True, which="both", alpha=0.3)
    return _png(fig)


def theta_chart_png(times, theta, theta_true=None):
    fig, ax = plt.subplots(figsize=(6, 2.6))
    for i in range(theta.shape[1]):
        line, = ax.plot(times, theta[:, i], label=f"theta{i + 1}")
        if theta_true is not None:
            ax.axhline(theta_true[i], color=line.get_color(), linestyle=":", linewidth=0.8)
    ax.set_xlabel("t")
    ax.legend(fontsize=7, ncol=5)
    return _png(fig)


def pe_chart_png(pe):
    fig, ax = plt.subplots(figsize=(6, 2.6))
    ax.plot(pe.l_values, pe.min_eigs, marker="o", markersize=3)
    ax.axhline(0.0, color="gray", linewidth=0.8)
    ax.set_xlabel("L")
    ax.set_ylabel("min eig M_L")
    return _png(fig)


def monitor_chart_png(times, values, ylabel):
    fig, ax = plt.subplots(figsize=(6, 2.0))
    ax.plot(times, values)
    ax.set_xlabel("t")
    ax.set_ylabel(ylabel)
    return _png(fig)


def run_charts(record, pe=None):
    """PNG buffers for a run, keyed by file name."""
    charts = {}
    if record.times.size == 0:
        return charts
    charts["theta.png"] = theta_chart_png(record.times, record.theta, record.theta_true)
    if record.theta_true is not None:
        norms = error_norms(record.theta, record.theta_true, record.i_ext, record.n)
        charts["errors.png"] = error_chart_png(record.times, norms.theta_error, norms.param_error)
    if record.y is not None:
        charts["energy.png"] = monitor_chart_png(record.times, h_series(record.y, record.v), "H(t)")
    if pe is not None:
        charts["pe_sweep.png"] = pe_chart_png(pe)
    return charts


def save_run_plots(record, outdir, pe=None):
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    written = []
    for name, buffer in run_charts(record, pe).items():
        (outdir / name).write_bytes(buffer.getvalue())
        written.append(name)
    logger.info("saved %d plots to %s", len(written), outdir)
    return written


# ------------------ Report ------------------
def parameter_table(summary):
    """Rows of (a, b, c, eps) at start, at the end and (when known) the true values."""
    rows = [["", *PARAM_NAMES]]
    for label, key in (("initial", "initial_params"), ("final", "final_params"), ("true", "true_params")):
        params = summary.get(key)
        if params:
            rows.append([label, *(_fmt(params[name]) for name in PARAM_NAMES)])
    return rows


def generate_pdf_report(summary, record=None, bounds=None, pe=None, title="Identification Report"):
    """Generate a PDF report of one identification run"""
    buffer = io.BytesIO()
    doc = SimpleDocTemplate(buffer, pagesize=letter)
    styles = getSampleStyleSheet()
    elements = []

    title_style = ParagraphStyle('Title', parent=styles['Title'], fontSize=18, spaceAfter=12)
    heading_style = ParagraphStyle('Heading1', parent=styles['Heading1'], fontSize=14, spaceAfter=6,
                                   spaceBefore=12)
    normal_style = ParagraphStyle('Normal', parent=styles['Normal'], fontSize=10, spaceAfter=6)

    elements.append(Paragraph(sanitize_text(title), title_style))
    elements.append(Paragraph(sanitize_text(
        f"Mode: {summary.get('mode', '-')}, samples: {summary.get('samples', 0)}, "
        f"final time: {_fmt(summary.get('final_time'))}"), normal_style))
    elements.append(Spacer(1, 0.2 * inch))

    elements.append(Paragraph(sanitize_text("Estimated Parameters"), heading_style))
    table = Table(parameter_table(summary), colWidths=[1.0 * inch] + [1.2 * inch] * 4)
    table.setStyle(TableStyle([
        ('BACKGROUND', (0, 0), (-1, 0), colors.lightgrey),
        ('TEXTCOLOR', (0, 0), (-1, 0), colors.black),
        ('ALIGN', (0, 0), (-1, -1), 'CENTER'),
        ('FONTNAME', (0, 0), (-1, 0), 'Helvetica-Bold'),
        ('BOTTOMPADDING', (0, 0), (-1, 0), 8),
        ('BACKGROUND', (0, 1), (-1, -1), colors.white),
        ('GRID', (0, 0), (-1, -1), 1, colors.black),
    ]))
    elements.append(table)
    elements.append(Paragraph(sanitize_text(f"Final estimate status: {summary.get('final_status', '-')}"),
                              normal_style))

    if "final_param_error" in summary:
        elements.append(Paragraph(sanitize_text("Convergence"), heading_style))
        for label, key in (("initial (a, b, c, eps) error", "initial_param_error"),
                           ("final (a, b, c, eps) error", "final_param_error"),
                           ("reduction factor", "reduction_factor"),
                           ("peak theta error", "peak_theta_error"),
                           (f"time to theta error <= {summary.get('tolerance', 0.05):g}", "time_to_tolerance")):
            elements.append(Paragraph(sanitize_text(f"{label}: {_fmt(summary.get(key))}"), normal_style))

    if record is not None and record.times.size:
        try:
            for name, chart in run_charts(record, pe).items():
                elements.append(Image(chart, width=6 * inch, height=2.6 * inch if name != "energy.png" else 2 * inch))
        except (ValueError, RuntimeError) as exc:
            # charts are optional in the report
            logger.warning("could not render charts: %s", exc)

    if bounds is not None:
        elements.append(Paragraph(sanitize_text("Coupling Bound"), heading_style))
        verdict = "satisfied" if bounds.ok else "violated (sufficient condition only)"
        elements.append(Paragraph(sanitize_text(
            f"r = {bounds.r:.6g}, eps*b/r = {bounds.sigma_max:.6g}, sigma = {bounds.sigma:.6g}: {verdict}"),
            normal_style))

    if pe is not None:
        elements.append(Paragraph(sanitize_text("Persistent Excitation"), heading_style))
        passing = pe.smallest_passing_length()
        text = (f"M_L positive definite for L >= {passing:g}" if passing is not None
                else "M_L never positive definite on the swept window lengths")
        elements.append(Paragraph(sanitize_text(text), normal_style))

    monitor = summary.get("h_monitor")
    if monitor:
        elements.append(Paragraph(sanitize_text("Boundedness Monitor"), heading_style))
        elements.append(Paragraph(sanitize_text(
            f"sup H = {_fmt(monitor['sup'])}, last-quartile growth = {_fmt(monitor['last_quartile_growth'])}, "
            f"bounded: {monitor['bounded']}"), normal_style))

    doc.build(elements)
    buffer.seek(0)
    return buffer
