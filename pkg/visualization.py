# ------------------ Visualization Functions ------------------
import numpy as np
import plotly.graph_objects as go

THETA_LABELS = ["θ1", "θ2", "θ3", "θ4", "θ5"]


def _layout(fig, title, xaxis_title, yaxis_title, height=320, log_y=False):
    fig.update_layout(
        title={
            'text': f"<b>{title}</b>",
            'x': 0.5,
            'xanchor': 'center',
            'font': {'size': 16}
        },
        xaxis_title=xaxis_title,
        yaxis_title=yaxis_title,
        height=height,
        margin=dict(l=40, r=20, t=50, b=40),
        legend=dict(orientation="h", y=-0.25)
    )
    if log_y:
        fig.update_yaxes(type="log")
    return fig


def create_bounds_gauge(report):
    """Gauge of sigma against the sufficient bound eps*b/r."""
    upper = report.sigma_max if np.isfinite(report.sigma_max) else max(1.0, 2 * report.sigma)
    axis_max = max(upper, report.sigma) * 1.25 or 1.0
    fig = go.Figure(go.Indicator(
        mode="gauge+number",
        value=report.sigma,
        number={'valueformat': '.4g'},
        gauge={
            'axis': {'range': [0, axis_max]},
            'bar': {'color': "darkblue"},
            'bgcolor': "white",
            'borderwidth': 2,
            'bordercolor': "gray",
            'steps': [
                {'range': [0, upper], 'color': 'green'},
                {'range': [upper, axis_max], 'color': 'red'}],
            'threshold': {
                'line': {'color': "red", 'width': 4},
                'thickness': 0.75,
                'value': upper}
        }
    ))
    fig.update_layout(
        title={
            'text': f"<b>Coupling σ vs εb/r = {upper:.4g}</b>",
            'x': 0.5,
            'xanchor': 'center',
            'font': {'size': 16}
        },
        height=250,
        margin=dict(l=20, r=30, t=50, b=20)
    )
    return fig


def create_error_chart(times, theta_error, param_error=None):
    fig = go.Figure()
    fig.add_trace(go.Scatter(x=times, y=theta_error, mode="lines", name="‖θ − θ*‖"))
    if param_error is not None:
        fig.add_trace(go.Scatter(x=times, y=param_error, mode="lines", name="‖(a,b,c,ε) − (a,b,c,ε)*‖"))
    return _layout(fig, "Identification Error", "t", "error", log_y=True)


def create_theta_chart(times, theta, theta_true=None):
    fig = go.Figure()
    for i, label in enumerate(THETA_LABELS):
        fig.add_trace(go.Scatter(x=times, y=theta[:, i], mode="lines", name=label))
        if theta_true is not None:
            fig.add_hline(y=theta_true[i], line_dash="dot", line_color="gray")
    return _layout(fig, "Parameter Estimates", "t", "θ(t)", height=380)


def create_pe_chart(pe):
    fig = go.Figure()
    fig.add_trace(go.Scatter(x=pe.l_values, y=pe.min_eigs, mode="lines+markers", name="min eig M_L"))
    passing = pe.smallest_passing_length()
    if passing is not None:
        fig.add_vline(x=passing, line_dash="dash", line_color="green")
    return _layout(fig, "Persistent Excitation", "window length L", "smallest eigenvalue")


def create_gain_sweep_chart(curves):
    """curves: g -> (times, theta_error)."""
    fig = go.Figure()
    for g, (times, errors) in curves.items():
        fig.add_trace(go.Scatter(x=times, y=errors, mode="lines", name=f"g = {g:g}"))
    return _layout(fig, "Gain Sweep", "t", "‖θ − θ*‖", height=380, log_y=True)


def create_monitor_chart(times, values, title, yaxis_title):
    # used for both H(t) and V_t
    fig = go.Figure(go.Scatter(x=times, y=values, mode="lines", showlegend=False))
    return _layout(fig, title, "t", yaxis_title, height=260)
