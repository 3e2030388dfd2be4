"""
Simple launcher for the operator lab
"""
import os
import sys

from cli import run
from config import Config


def main():
    if not os.path.exists(Config.DATA_DIR):
        print(f"⚠️  Warning: {Config.DATA_DIR}/ not found. Run `python setup_data.py` for the sample inputs.")

    try:
        status = run(sys.argv[1:])
    except KeyboardInterrupt:
        print("\n🛑 Experiment stopped by user")
        status = 1
    sys.exit(status)


if __name__ == "__main__":
    main()
