"""Head-to-head benchmark of the four mechanisms over seeded instances.

Runs the iterative machine-learning auction (quadratic and linear
learners), the clock auction baseline, full-information VCG, and a
random-allocation floor on the same batch of GSVM instances, and prints
the aggregated result table.
"""

from auctionlab.experiments import ExperimentConfig, MechanismSpec, run_batch, rows_to_csv
from auctionlab.learning import KernelSpec
from auctionlab.mlca import LearnerSpec

cfg = ExperimentConfig(
    "gsvm", 8, 3, tuple(range(101, 111)),
    (
        MechanismSpec("mlca", learner=LearnerSpec("svr", KernelSpec("quadratic", 0.1)),
                      q_max=16, q_init=8, q_round=4),
        MechanismSpec("mlca", learner=LearnerSpec("linear"),
                      q_max=16, q_init=8, q_round=4),
        MechanismSpec("cca", heuristic="clock"),
        MechanismSpec("vcg"),
        MechanismSpec("random"),
    ),
)

rows = run_batch(cfg)

print(f"GSVM m={cfg.m} n={cfg.n}, seeds {cfg.seeds[0]}..{cfg.seeds[-1]}\n")
print("revenue is reported as a share of the optimal welfare\n")
print(f"{'mechanism':<22}{'efficiency':>12}{'(se)':>8}{'revenue':>10}{'rounds':>8}")
for r in rows:
    label = r.mechanism if r.ml == "-" else f"{r.mechanism}[{r.ml}]"
    print(f"{label:<22}{r.efficiency_mean:>12.4f}{r.efficiency_se:>8.4f}"
          f"{r.revenue_mean:>10.2f}{r.rounds_mean:>8.1f}")

print("\nVCG sees full valuations, so it is the efficiency ceiling; the")
print("iterative auction with a quadratic learner gets there with a")
print("small fixed query budget, while the clock baseline needs a long")
print("price-discovery phase and the linear learner underfits")

print("\nCSV output:")
print(rows_to_csv(rows))
