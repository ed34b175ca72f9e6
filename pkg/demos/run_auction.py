"""End-to-end iterative auction on a synthetic spectrum instance.

Generates a GSVM-style domain, runs the machine-learning-powered auction
with a quadratic-kernel learner, and prints the query trace, the final
allocation, payments, and efficiency against the true optimum.
"""

from auctionlab.core import bundle_to_string, utility
from auctionlab.learning import KernelSpec, OracleModel
from auctionlab.mlca import LearnerSpec, MlcaConfig, run_mlca
from auctionlab.valuemodels import BidderStrategy, generate_gsvm
from auctionlab.wdp import WdpProblem, solve

SEED = 101
M, N = 10, 4

domain = generate_gsvm(SEED, M, N)
cfg = MlcaConfig(
    q_max=30,
    q_init=10,
    q_round=4,
    learner=LearnerSpec("svr", KernelSpec("quadratic", 0.1)),
    seed=SEED,
)
print(f"GSVM instance: m={M} items, n={N} bidders, seed {SEED}")
print(f"query budget {cfg.q_max}, {cfg.q_init} initial, {cfg.q_round} per round, "
      f"{cfg.rounds()} rounds\n")

outcome = run_mlca(domain, [BidderStrategy() for _ in range(N)], cfg)

per_round = {}
for e in outcome.trace:
    if e["type"] == "report":
        per_round.setdefault(e["round"], []).append(e)
for t in sorted(per_round):
    answered = ", ".join(
        f"bidder {e['bidder']}<-{bundle_to_string(e['bundle'])} ({e['provenance']})"
        for e in per_round[t]
    )
    print(f"round {t}: {answered}")

true_opt = solve(WdpProblem(models=tuple(OracleModel(b) for b in domain.bidders)))
achieved = sum(b.value(outcome.allocation.bundle(i)) for i, b in enumerate(domain.bidders))

print("\nfinal allocation and payments:")
for i in range(N):
    b = outcome.allocation.bundle(i)
    u = utility(i, outcome.allocation, outcome.payments, domain.bidders[i].value)
    print(f"  bidder {i}: {bundle_to_string(b)}  pays {outcome.payments[i]:7.2f}  "
          f"utility {u:7.2f}")
print(f"\nachieved welfare {achieved:.2f} / optimal {true_opt.objective:.2f} "
      f"-> efficiency {achieved / true_opt.objective:.4f}")
print(f"total revenue {outcome.payments.total():.2f}")
