app_name = "robust-copula"
version = "0.1.0"

LOGGER_NAME = "RobustCopula"
LOG_FILE = "robust_copula.log"
DB_LOG_FILE = "sqlalchemy.log"

CHECKPOINT_DB = "checkpoints.sqlite"

EXIT_OK = 0

# Row labels of the strategy comparison table, in output order.
STAT_ROWS = (
    "mean_utility",
    "var_terminal_wealth",
    "q30_terminal_wealth",
    "q90_terminal_wealth",
    "max_terminal_wealth",
    "min_terminal_wealth",
)

WEALTH_QUANTILE_LEVELS = (0.05, 0.25, 0.5, 0.75, 0.95)
