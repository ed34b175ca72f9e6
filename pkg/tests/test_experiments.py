import pytest

from auctionlab.experiments import (
    ExperimentConfig,
    MechanismSpec,
    _anova_p,
    generate_domain,
    grid_to_csv,
    kernel_grid,
    manipulation_study,
    manipulation_to_csv,
    resolve_role,
    rows_to_csv,
    run_batch,
)
from auctionlab.learning import KernelSpec
from auctionlab.mlca import LearnerSpec

QUAD = LearnerSpec("svr", KernelSpec("quadratic", 0.1))

SMALL = ExperimentConfig(
    "gsvm", 6, 3, (1, 2),
    (
        MechanismSpec("mlca", learner=QUAD, q_max=12, q_init=6, q_round=3),
        MechanismSpec("cca", heuristic="clock"),
        MechanismSpec("vcg"),
        MechanismSpec("random"),
    ),
)


@pytest.fixture(scope="module")
def rows():
    return run_batch(SMALL)


class TestRunBatch:
    def test_vcg_is_fully_efficient(self, rows):
        vcg = next(r for r in rows if r.mechanism == "vcg")
        assert vcg.efficiency_mean == 1.0
        assert vcg.revenue_core_mean is None

    def test_random_baseline(self, rows):
        rnd = next(r for r in rows if r.mechanism == "random")
        assert 0.0 <= rnd.efficiency_mean < 1.0
        assert rnd.revenue_mean == 0.0

    def test_mlca_row_has_learning_columns(self, rows):
        mlca = next(r for r in rows if r.mechanism == "mlca")
        assert mlca.ml == "svr-quadratic"
        assert mlca.learning_error is not None and mlca.learning_error >= 0.0
        assert mlca.solver_nodes > 0

    def test_failure_names_seed(self):
        bad = ExperimentConfig(
            "gsvm", 6, 3, (1,),
            (MechanismSpec("mlca", learner=QUAD, q_max=70, q_init=64, q_round=3),),
        )
        with pytest.raises(RuntimeError, match="seed 1"):
            run_batch(bad)

    def test_unknown_generator(self):
        with pytest.raises(ValueError):
            generate_domain("lsvm", 1, 6, 3)


class TestValidation:
    def test_mechanism_spec(self):
        with pytest.raises(ValueError):
            MechanismSpec("auction")
        with pytest.raises(ValueError):
            MechanismSpec("mlca")

    def test_labels(self):
        assert MechanismSpec("mlca", learner=QUAD).label() == "mlca[svr-quadratic]"
        assert MechanismSpec("cca", heuristic="profit_max").label() == "cca[profit_max]"
        assert MechanismSpec("vcg").ml_label() == "-"

    def test_empty_seeds(self):
        with pytest.raises(ValueError):
            ExperimentConfig("gsvm", 6, 3, (), (MechanismSpec("vcg"),))

    def test_resolve_role(self):
        assert resolve_role("national", 4) == 3
        assert resolve_role("2", 4) == 2
        assert resolve_role(0, 4) == 0
        with pytest.raises(ValueError):
            resolve_role(4, 4)


class TestAnova:
    def test_identical_groups(self):
        assert _anova_p([[1.0, 1.0], [1.0, 1.0]]) == 1.0

    def test_distinct_groups(self):
        p = _anova_p([[0.0, 0.1, 0.05], [5.0, 5.1, 4.9]])
        assert p < 0.01


class TestKernelGrid:
    def test_cells_and_csv(self):
        cells = kernel_grid("gsvm", 5, 2, (1,), (KernelSpec("linear"),), (0.0,), (8,))
        assert len(cells) == 1
        cell = cells[0]
        assert 0.0 <= cell["efficiency_mean"] <= 1.0
        assert cell["sv_count"] <= 8
        text = grid_to_csv(cells)
        assert text.splitlines()[0].startswith("kernel,lambda,epsilon,q")
        assert len(text.splitlines()) == 2


class TestManipulationStudy:
    def test_truthful_row_present(self):
        result = manipulation_study("gsvm", 5, 3, (1, 2), "national", (0.5,),
                                    QUAD, q_max=10, q_init=5, q_round=3)
        names = [r["strategy"] for r in result["rows"]]
        assert names == ["truthful", "overbid"]
        assert set(result["anova_p"]) == {"social_welfare", "marginal_welfare", "utility"}
        text = manipulation_to_csv(result)
        assert text.splitlines()[-1].startswith("anova_p")


class TestCsvDeterminism:
    def test_rows_byte_identical(self, rows):
        again = run_batch(SMALL)
        assert rows_to_csv(rows) == rows_to_csv(again)
