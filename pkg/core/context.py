import logging
from dataclasses import dataclass, field


class TrialContextFilter(logging.Filter):
    """
    A logging filter that injects the trial label into log records.
    """

    def __init__(self, trial_label: str):
        super().__init__()
        self.trial_label = trial_label

    def filter(self, record: logging.LogRecord) -> bool:
        """
        Adds the trial label to the log record.

        Args:
            record (logging.LogRecord): The log record to be processed.

        Returns:
            bool: Always True to allow the record to be processed.
        """
        record.trial = self.trial_label
        return True


@dataclass
class TrialContext:
    """
    Execution context of one experiment trial: its label, its resolved seed
    and a dedicated ``trial.<label>`` logger tagged by TrialContextFilter.
    """
    label: str
    seed: int
    logger: logging.Logger = field(init=False, repr=False)

    def __post_init__(self):
        self.logger = logging.getLogger(f"trial.{self.label}")
        if not any(
                isinstance(f, TrialContextFilter)
                for f in self.logger.filters):
            self.logger.addFilter(TrialContextFilter(self.label))

    def log_progress(self, message: str, level: int = logging.INFO) -> None:
        self.logger.log(level, "[seed %d] %s", self.seed, message)
