"""
Streamlit dashboard for differential suite reports
"""
from pathlib import Path

import pandas as pd
import plotly.express as px
import streamlit as st

from src.config import settings
from src.harness import HostedTarget, builtin_cases, failures, flaw_coverage, load_report, run_suite, summarize
from src.protocol import ReportError
from src.server import HARDENED, FlawSet

# Configure Streamlit
st.set_page_config(
    page_title="CFT Security Workbench",
    page_icon="🛡️",
    layout="wide",
    initial_sidebar_state="expanded"
)

VERDICT_COLORS = {
    "VULNERABLE_CONFIRMED": "#d62728",
    "SECURE": "#2ca02c",
    "INCONCLUSIVE": "#ff7f0e",
}


class WorkbenchUI:
    """Streamlit UI over suite reports"""

    def __init__(self):
        self.session_state_init()

    def session_state_init(self):
        """Initialize session state"""
        if 'report_path' not in st.session_state:
            st.session_state.report_path = settings.REPORT_PATH
        if 'last_run' not in st.session_state:
            st.session_state.last_run = None

    def load(self) -> pd.DataFrame:
        try:
            return load_report(st.session_state.report_path)
        except ReportError as e:
            st.warning(f"No report loaded: {e}")
            return pd.DataFrame()

    def render_sidebar(self):
        """Render sidebar"""
        st.sidebar.title("🛡️ CFT Workbench")

        st.session_state.report_path = st.sidebar.text_input("Report file", st.session_state.report_path)
        if Path(st.session_state.report_path).is_file():
            st.sidebar.success("🟢 Report found")
        else:
            st.sidebar.error("🔴 Report not found")

        st.sidebar.markdown("---")
        page = st.sidebar.selectbox(
            "Page",
            ["Overview", "Cases", "Flaw Coverage", "Failures", "Run Suite"]
        )
        return page

    def render_overview_page(self, df: pd.DataFrame):
        """Render verdict overview"""
        st.header("📊 Suite Overview")
        if df.empty:
            return

        passed = int(df["passed"].astype(bool).sum())
        col1, col2, col3, col4 = st.columns(4)
        with col1:
            st.metric("Records", len(df))
        with col2:
            st.metric("Passed", passed)
        with col3:
            st.metric("Failed", len(df) - passed)
        with col4:
            st.metric("Inconclusive", int((df["verdict"] == "INCONCLUSIVE").sum()))

        counts = df.groupby(["target", "verdict"]).size().reset_index(name="count")
        fig = px.bar(
            counts,
            x='target',
            y='count',
            color='verdict',
            color_discrete_map=VERDICT_COLORS,
            title='Verdicts per Target',
        )
        st.plotly_chart(fig, use_container_width=True)

        st.subheader("Verdicts per Category")
        st.dataframe(summarize(df), use_container_width=True)

    def render_cases_page(self, df: pd.DataFrame):
        """Render filterable case table"""
        st.header("🧪 Cases")
        if df.empty:
            return

        col1, col2 = st.columns([1, 1])
        with col1:
            categories = st.multiselect("Category", sorted(df["category"].unique()))
        with col2:
            targets = st.multiselect("Target", sorted(df["target"].unique()))

        view = df
        if categories:
            view = view[view["category"].isin(categories)]
        if targets:
            view = view[view["target"].isin(targets)]
        st.dataframe(view, use_container_width=True)

        fig = px.scatter(
            view,
            x='case_id',
            y='duration_ms',
            color='verdict',
            symbol='target',
            color_discrete_map=VERDICT_COLORS,
            hover_data=['signature', 'reason'],
            title='Case Duration',
            labels={'duration_ms': 'Duration (ms)', 'case_id': 'Case'}
        )
        st.plotly_chart(fig, use_container_width=True)

    def render_coverage_page(self, df: pd.DataFrame):
        """Render per-flaw confirmations"""
        st.header("🎯 Flaw Coverage")
        if df.empty:
            return

        coverage = flaw_coverage(df).reset_index()
        if coverage.empty:
            st.info("No flaw-targeting cases in this report")
            return
        st.dataframe(coverage, use_container_width=True)

        fig = px.bar(
            coverage,
            x='targets_flaw',
            y=['cases', 'confirmed'],
            barmode='group',
            title='Targeting Cases and Confirmations per Flaw',
            labels={'targets_flaw': 'Flaw', 'value': 'Cases'}
        )
        st.plotly_chart(fig, use_container_width=True)

        st.subheader("Catalog")
        catalog = pd.DataFrame([
            {"flaw": case.targets_flaw.label, "case": case.id, "signature": str(case.signature)}
            for case in builtin_cases() if case.targets_flaw
        ])
        fig = px.pie(catalog, names='flaw', title='Catalog Cases per Flaw')
        st.plotly_chart(fig, use_container_width=True)

    def render_failures_page(self, df: pd.DataFrame):
        """Render records whose verdict differs from the expectation"""
        st.header("❌ Failures")
        if df.empty:
            return

        failed = failures(df)
        if failed.empty:
            st.success("Every case matched its expected verdict")
        else:
            st.dataframe(failed, use_container_width=True)

    def render_run_page(self):
        """Run a self-hosted differential suite"""
        st.header("▶️ Run Suite")

        flaws_text = st.text_input("Flaws of the flawed target", "all", help="all, none or a list such as F1,F4")
        col1, col2 = st.columns(2)
        with col1:
            receive_ms = st.number_input("Reply timeout (ms)", 500, 30000, settings.RECEIVE_TIMEOUT_MS)
        with col2:
            read_ms = st.number_input("Server read timeout (ms)", 100, 10000, min(settings.READ_TIMEOUT_MS, 1000))

        if st.button("Run"):
            if read_ms >= receive_ms:
                st.error("Server read timeout must be shorter than the reply timeout")
                return
            flaws = FlawSet.parse(flaws_text)
            with st.spinner("Running suite..."):
                with HostedTarget(flaws, "flawed", settings.CANARY, read_ms / 1000) as flawed, \
                        HostedTarget(HARDENED, "hardened", settings.CANARY, read_ms / 1000) as hardened:
                    report = run_suite(
                        flawed.target, hardened.target,
                        report_path=st.session_state.report_path,
                        canary=settings.CANARY,
                        receive_timeout=receive_ms / 1000,
                    )
            st.session_state.last_run = report

        report = st.session_state.last_run
        if report is not None:
            if report.passed:
                st.success(f"PASS: {report.confirmations} confirmations in {report.wall_time_s}s")
            else:
                st.error(f"FAIL: {len(report.failures)} failures")
                for failure in report.failures:
                    st.write(failure)

    def run(self):
        """Run the Streamlit app"""
        page = self.render_sidebar()

        if page == "Run Suite":
            self.render_run_page()
            return

        df = self.load()
        if page == "Overview":
            self.render_overview_page(df)
        elif page == "Cases":
            self.render_cases_page(df)
        elif page == "Flaw Coverage":
            self.render_coverage_page(df)
        elif page == "Failures":
            self.render_failures_page(df)


# Run the app
if __name__ == "__main__":
    app = WorkbenchUI()
    app.run()
