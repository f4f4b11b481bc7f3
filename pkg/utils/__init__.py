from .csv_utils import config_hash, read_csv, write_csv
from .log_utils import LOG_PREFIX, LogCb, LogCollector, console_log, safe_log
from .platform_utils import open_output_folder
