import io
import zipfile
from pathlib import Path

import pandas as pd
import streamlit as st

from analysis import error_norms, h_series
from errors import FhnIdentError
from experiments import bounds_for, run_gain_sweep, run_identification, run_pe_sweep, summarize_run, with_integrator
from export import FLOAT_FORMAT, run_frames
from identify import lyapunov_series
from parsers import load_config
from pdf_generator import generate_pdf_report
from visualization import (create_bounds_gauge, create_error_chart, create_gain_sweep_chart, create_monitor_chart,
                           create_pe_chart, create_theta_chart)

CONFIG_DIR = Path(__file__).parent / "configs"


@st.cache_data(show_spinner=False)
def cached_run(config_path, t_end, stride):
    cfg = with_integrator(load_config(config_path), t_end=t_end, stride=stride)
    record = run_identification(cfg)
    return cfg, record


def zip_artifacts(record):
    buffer = io.BytesIO()
    with zipfile.ZipFile(buffer, "w", zipfile.ZIP_DEFLATED) as archive:
        for name, frame in run_frames(record).items():
            archive.writestr(name, frame.to_csv(index=False, float_format=FLOAT_FORMAT))
    buffer.seek(0)
    return buffer


# ------------------ Main Application ------------------
def main():
    st.set_page_config(page_title="FHN Network Identifier", layout="wide")

    st.title("FHN Network Identifier")
    st.markdown("#### _Speed-gradient identification of coupled FitzHugh–Nagumo neurons_")
    st.markdown("---")

    configs = sorted(CONFIG_DIR.glob("*.yaml"))
    simulation_configs = [p for p in configs if "data" not in p.stem]
    if not simulation_configs:
        st.error(f"No experiment configs found in {CONFIG_DIR}.")
        return

    with st.sidebar:
        choice = st.selectbox("Experiment", simulation_configs, format_func=lambda p: p.stem)
        t_end = st.number_input("Horizon t_end", min_value=1.0, max_value=6000.0, value=300.0, step=50.0)
        stride = st.number_input("Record stride (steps)", min_value=1, max_value=10000, value=100, step=10)
        gains = st.text_input("Gain sweep g values", value="0.1,1,5,10")

    if st.button("Run Identification"):
        with st.spinner("Integrating plant, filters and identifier..."):
            try:
                cfg, record = cached_run(str(choice), float(t_end), int(stride))
            except FhnIdentError as exc:
                st.error(f"Run failed: {exc}")
                return

        summary = summarize_run(record, tolerance=float(cfg.output.get("tolerance", 0.05)))
        bounds = bounds_for(cfg)
        pe = run_pe_sweep(record, cfg)
        st.success("Identification complete!")

        with st.container():
            st.markdown("### 🔍 Run Overview")
            col1, col2, col3 = st.columns([0.9, 1, 0.9])
            with col1:
                st.plotly_chart(create_bounds_gauge(bounds), use_container_width=True)
            with col2:
                st.metric("Final (a,b,c,ε) error", f"{summary['final_param_error']:.3g}",
                          delta=f"÷{summary['reduction_factor']:.3g}", delta_color="inverse")
                st.metric("Final estimate", summary["final_status"])
            with col3:
                st.dataframe(pd.DataFrame({key: summary[key] for key in ("initial_params", "final_params",
                                                                         "true_params")}))

        norms = error_norms(record.theta, record.theta_true, record.i_ext, record.n)
        st.markdown("### Convergence")
        st.plotly_chart(create_error_chart(record.times, norms.theta_error, norms.param_error),
                        use_container_width=True)
        st.plotly_chart(create_theta_chart(record.times, record.theta, record.theta_true),
                        use_container_width=True)

        tab1, tab2, tab3 = st.tabs(["Persistent Excitation", "Monitors", "Gain Sweep"])
        with tab1:
            if pe is None:
                st.info("Horizon too short for the PE window sweep.")
            else:
                st.plotly_chart(create_pe_chart(pe), use_container_width=True)
        with tab2:
            st.plotly_chart(create_monitor_chart(record.times, h_series(record.y, record.v), "Energy H(t)", "H"),
                            use_container_width=True)
            lyap = lyapunov_series(record.theta, record.q, record.theta_true, record.gain)
            st.plotly_chart(create_monitor_chart(record.times, lyap, "Lyapunov V_t", "V"),
                            use_container_width=True)
        with tab3:
            try:
                g_values = [float(g) for g in gains.split(",") if g.strip()]
                with st.spinner("Running gain sweep..."):
                    results = run_gain_sweep(cfg, g_values, max_workers=1)
                curves = {}
                for g, result in results.items():
                    if isinstance(result, Exception):
                        st.error(f"g = {g:g}: {result}")
                        continue
                    curves[g] = (result.times, error_norms(result.theta, result.theta_true, result.i_ext,
                                                           result.n).theta_error)
                st.plotly_chart(create_gain_sweep_chart(curves), use_container_width=True)
            except (ValueError, FhnIdentError) as exc:
                st.error(f"Gain sweep failed: {exc}")

        st.markdown("### Export Options")
        st.download_button(label="Download Run Data (CSV, zip)", data=zip_artifacts(record),
                           file_name=f"{cfg.name}_run.zip", mime="application/zip")
        st.download_button(label="Download Report (PDF)",
                           data=generate_pdf_report(summary, record=record, bounds=bounds, pe=pe,
                                                    title=f"{cfg.name} report"),
                           file_name=f"{cfg.name}_report.pdf", mime="application/pdf")
    else:
        st.info("Pick an experiment and press Run Identification.")
        st.markdown("""
        ### How It Works

        1. **Simulate** the coupled FHN network from the chosen config
        2. **Filter** the summed potentials into the linear regression y* = θᵀz
        3. **Adapt** θ with the speed-gradient law θ̇ = −Γδz
        4. **Check** persistent excitation, the coupling bound and the monitors
        """)


if __name__ == "__main__":
    main()
