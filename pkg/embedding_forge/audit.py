import os
import datetime
import logging
from typing import Any, Dict

logger = logging.getLogger(__name__)


class AuditLogger:
    def __init__(self, audit_log_path: str):
        self.audit_log_path = audit_log_path
        directory = os.path.dirname(audit_log_path)
        if directory:
            os.makedirs(directory, exist_ok=True)

    def log_event(self, event_type: str, details: str, status: str = "INFO"):
        """
        Appends one experiment event line.
        """
        timestamp = datetime.datetime.now().strftime("%Y-%m-%d %H:%M:%S")
        log_entry = f"[{timestamp}] [{status}] [{event_type}] {details}\n"

        try:
            with open(self.audit_log_path, "a", encoding="utf-8") as f:
                f.write(log_entry)
        except OSError as e:
            logger.error(f"Failed to write to audit log: {e}")

    def log_training_start(self, model: str, config: Dict[str, Any]):
        summary = " ".join(f"{k}={v}" for k, v in sorted(config.items()))
        self.log_event("TRAIN_START", f"{model}: {summary}")

    def log_training_done(self, model: str, epochs: int, seconds: float, lfw_params: Dict[str, float]):
        params = ", ".join(f"{k}={v:.6g}" for k, v in lfw_params.items()) or "none"
        self.log_event("TRAIN_DONE", f"{model}: {epochs} epochs in {seconds:.1f}s, lfw params: {params}", "SUCCESS")

    def log_divergence(self, diagnostics: Dict[str, Any]):
        details = ", ".join(f"{k}={v}" for k, v in diagnostics.items())
        self.log_event("DIVERGENCE", details, "FAILURE")

    def log_evaluation(self, model_path: str, correct: int, total: int, skipped: int):
        accuracy = correct / total if total else 0.0
        self.log_event("EVALUATION", f"{model_path}: {correct}/{total} ({accuracy:.2%}), skipped {skipped}")
