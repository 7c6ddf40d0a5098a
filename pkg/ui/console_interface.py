"""
Console rendering for AttractorLab runs.
"""

from typing import List, Sequence, Tuple

from config.constants import ClassName, UIConfig
from lab.classes import ClassReport
from lab.compactness import CompactnessReport
from utils.logger import LoggerMixin


class ConsoleInterface(LoggerMixin):
    """Prints banners, status lines, summaries and reports."""

    def display_welcome_message(self, verb: str):
        print(f"\n{UIConfig.MENU_SEPARATOR}")
        print(f"🧪 AttractorLab - {verb}")
        print(UIConfig.MENU_SEPARATOR)

    def display_status(self, message: str, status_type: str = "info"):
        prefix_map = {
            "success": UIConfig.SUCCESS_PREFIX,
            "error": UIConfig.ERROR_PREFIX,
            "warning": UIConfig.WARNING_PREFIX,
            "info": UIConfig.INFO_PREFIX,
            "loading": UIConfig.LOADING_PREFIX,
        }
        print(f"{prefix_map.get(status_type, UIConfig.INFO_PREFIX)} {message}")

    def display_error(self, message: str):
        self.display_status(message, "error")

    def display_warning(self, message: str):
        self.display_status(message, "warning")

    def display_result(self, lines: Sequence[str], title: str = "Summary"):
        print(f"\n{UIConfig.MENU_SEPARATOR}")
        print(f"--- {title} ---")
        print(UIConfig.MENU_SEPARATOR)
        for line in lines:
            print(line)
        print(UIConfig.MENU_SEPARATOR)

    def display_force_list(self, forces: List[Tuple[str, str]]):
        width = max(len(name) for name, _ in forces)
        self.display_result([f"{name.ljust(width)}  {description}" for name, description in forces],
                            title="Gallery")

    def display_class_report(self, report: ClassReport, source: str):
        lines = [f"p = {report.p:g}, lpb norm = {report.lpb:.6g}, decay threshold = {report.decay:.3g}"]
        for name in ClassName:
            item = report.verdicts[name]
            value = "" if item.value is None else f"  (value {item.value:.3g})"
            lines.append(f"{name.value:<20} {item.holds.value}{value}")
        lines.extend(f"warning: {w}" for w in report.warnings)
        self.display_result(lines, title=f"Classes of {source}")

    def display_compactness_report(self, report: CompactnessReport, source: str):
        lines = [f"verdict: {report.verdict.value}"]
        if report.plateau is not None:
            lines.append(f"tail plateau: {report.plateau:.6g}")
        if report.witness is not None:
            lines.append(f"witness snapshots: {report.witness[0]}, {report.witness[1]}")
        if report.norm_gap is not None:
            lines.append(f"norm gap: {report.norm_gap:.3g} (candidate stable: {report.candidate_stable})")
        lines.extend(f"note: {note}" for note in report.notes)
        lines.append(report.scope_note)
        self.display_result(lines, title=f"Compactness of {source}")
