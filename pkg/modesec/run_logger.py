import logging

# #################################################
# Run transcript logger. One bracket-tagged line per written artifact, e.g.
# [SWEEP] 55 channels x 11 noise levels, 200 trials, seed 1 -> out/sweep.csv

run_logger = logging.getLogger("RUN")

RUN_LOG_FILE = "run_log.txt"


def attach_run_file(path: str, formatter: logging.Formatter) -> logging.FileHandler:
    """Send RUN records to path (appending). Returns the handler so callers can detach it."""
    file_handler = logging.FileHandler(path, encoding="utf-8")
    file_handler.setFormatter(formatter)
    run_logger.addHandler(file_handler)
    return file_handler


def detach_run_file(handler: logging.FileHandler) -> None:
    run_logger.removeHandler(handler)
    handler.close()
