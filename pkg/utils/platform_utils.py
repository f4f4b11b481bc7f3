# utils/platform_utils.py
# Cross-platform helper for revealing the results folder
import os
import subprocess
from typing import Tuple

from config.config import IS_MAC, IS_WIN


def open_output_folder(path: str) -> Tuple[bool, str]:
    """
    Show the experiment output directory in the system file manager.

    The directory is created first when a run wrote nothing yet.

    :param path: output_dir of the experiment
    :return: (success, error_message)
    """
    if not os.path.isdir(path):
        try:
            os.makedirs(path, exist_ok=True)
        except OSError as e:
            return False, f"cannot create {path}: {e}"

    try:
        if IS_WIN:
            os.startfile(path)
        elif IS_MAC:
            subprocess.run(["open", path], check=True)
        else:
            # Linux and other Unix-like systems
            subprocess.run(["xdg-open", path], check=True)
        return True, ""
    except (OSError, subprocess.CalledProcessError) as e:
        return False, str(e)
