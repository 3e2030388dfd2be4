#!/usr/bin/env python3
"""
Data setup script for the operator lab
Creates the sample inputs read by --f table, --blocks file: and --transform
"""

import os
import sys

import numpy as np
import pandas as pd

from config import Config

SYMBOL_N = 4096
GROUPING_N = 30
TRANSFORM_N = 16


def create_data_directory(data_dir):
    """Create data directory if it doesn't exist"""
    os.makedirs(data_dir, exist_ok=True)
    print(f"✅ Created data directory {data_dir}")


def create_symbol_table(data_dir, N=SYMBOL_N):
    """Tabulated f(n) = ln n, one value per line"""
    values = pd.Series(np.log(np.arange(1, N + 1, dtype=float)))
    path = os.path.join(data_dir, os.path.basename(Config.SYMBOL_TABLE))
    values.to_csv(path, index=False, header=False, float_format="%.17g")
    print(f"✅ Created tabulated log symbol ({N} values)")
    return path


def create_grouping_file(data_dir, N=GROUPING_N, size=3):
    """Consecutive blocks of `size` indices, one comma-separated block per line"""
    path = os.path.join(data_dir, os.path.basename(Config.GROUPING_FILE))
    with open(path, "w") as f:
        for start in range(1, N + 1, size):
            f.write(",".join(str(j) for j in range(start, min(start + size, N + 1))) + "\n")
    print(f"✅ Created grouping file ({N} indices, blocks of {size})")
    return path


def create_identity_transform(data_dir, N=TRANSFORM_N):
    """Identity basis transform (orthonormal model) for --transform"""
    path = os.path.join(data_dir, os.path.basename(Config.TRANSFORM_FILE))
    np.savetxt(path, np.eye(N), delimiter=",", fmt="%.1f")
    print(f"✅ Created identity transform ({N}x{N})")
    return path


def main(data_dir=None):
    """Main setup function"""
    data_dir = data_dir or Config.DATA_DIR
    print("🚀 Setting up sample data for the operator lab...")

    try:
        create_data_directory(data_dir)
        create_symbol_table(data_dir)
        create_grouping_file(data_dir)
        create_identity_transform(data_dir)

        print("\n🎉 Data setup completed successfully!")
        print(f"📁 All data files created in the '{data_dir}/' directory")

    except Exception as e:
        print(f"❌ Error during setup: {e}")
        raise


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else None)
