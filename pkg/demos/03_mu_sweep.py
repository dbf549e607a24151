# %% [markdown]
# # Accuracy as the communities blur
#
# The mixing parameter mu is the share of each node's edges that leave its
# community. This runs a small version of the sweep through the command line
# entry point and plots it when matplotlib is available.

# %%
import csv
import tempfile
from pathlib import Path

from mxonmtf.cli import main

out = Path(tempfile.mkdtemp()) / "sweep"
main(["sweep", "--axis", "mu", "--values", "0.1", "0.3", "0.5", "--realizations", "2",
      "--n", "128", "--avg-degree", "12", "--restarts", "8", "--trials", "20", "-o", str(out),
      "--seed", "1"])

# %%
with open(out / "sweep.csv", newline="") as fh:
    for row in csv.DictReader(fh):
        print(f"mu={row['value']:>4} {row['method']:>8}  NMI {float(row['mean_nmi']):.3f}")

# %%
try:
    import matplotlib  # noqa: F401
except ImportError:
    print("matplotlib missing, skipping the plot")
else:
    main(["sweep", "--axis", "mu", "--values", "0.1", "0.5", "--realizations", "1", "--n", "96",
          "--avg-degree", "10", "--restarts", "4", "--trials", "10", "-o", str(out), "--plot"])
    print("plot written to", out / "sweep.png")
