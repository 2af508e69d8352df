"""
Command-line datasets
=====================

Every table and figure dataset is available from the ``replicability`` command
as CSV (default) or JSON.  Metadata lines starting with ``#`` record the
version, command line, seed and the numerical choices behind the numbers.
"""

import csv
import io
import subprocess
import sys


def replicability(*args):
    proc = subprocess.run([sys.executable, "-m", "replicability", *args],
                          capture_output=True, text=True, check=False)
    return proc.returncode, proc.stdout, proc.stderr


# %%
code, out, _ = replicability("effective-size", "--rho", "0.1,0.2", "--m", "100,274")
print(out)

# %%
# Parse the CSV payload, skipping the metadata header.
rows = list(csv.DictReader(io.StringIO("".join(
    line for line in out.splitlines(keepends=True) if not line.startswith("#")))))
print([(r["m"], r["rho"], r["m_e_rounded"]) for r in rows])

# %%
# Errors are a single machine-readable line and a nonzero exit code.
code, _, err = replicability("figure1", "--m", "five")
print("exit", code, "->", err.strip())
