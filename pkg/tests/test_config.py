import pytest

from cocoa_uq.config import DEFAULT_TASK_GROUPS, ENDPOINT_ENV, RunConfig, load_config
from cocoa_uq.errors import ConfigError


def write_config(tmp_path, body):
    path = tmp_path / "run.toml"
    path.write_text(body, encoding="utf-8")
    return path


def test_defaults_without_a_file():
    config = load_config()
    assert config.estimators == ["msp"]
    assert config.strategy == "greedy"
    assert config.similarity.backend == "jaccard"
    assert config.max_rejection == 0.5
    assert config.task_groups == DEFAULT_TASK_GROUPS
    assert config.synth.regime == "confident"


def test_full_file_round_trip(tmp_path):
    path = write_config(
        tmp_path,
        """
        [run]
        records = "records.jsonl"
        output = "scores.jsonl"
        estimators = ["msp", "cocoa_ppl"]
        strategy = "best"
        workers = 2

        [similarity]
        backend = "rouge_l"
        batch_size = 16

        [evaluation]
        max_rejection = 0.25
        dataset_name = "triviaqa"

        [evaluation.task_groups]
        qa = ["triviaqa"]

        [synth]
        seed = 7
        rho = 0.9
        """,
    )
    config = load_config(path)
    assert config.records == "records.jsonl"
    assert config.estimators == ["msp", "cocoa_ppl"]
    assert config.strategy == "best"
    assert config.workers == 2
    assert config.similarity.backend == "rouge_l"
    assert config.similarity.batch_size == 16
    assert config.max_rejection == 0.25
    assert config.task_groups == {"qa": ["triviaqa"]}
    assert config.synth.seed == 7
    assert config.synth.rho == 0.9


def test_datasets_table(tmp_path):
    path = write_config(
        tmp_path,
        """
        [datasets.triviaqa]
        records = "tqa.jsonl"
        scores = "tqa-scores.jsonl"

        [datasets.xsum]
        records = "xsum.jsonl"
        """,
    )
    config = load_config(path)
    assert config.datasets["triviaqa"] == {
        "records": "tqa.jsonl",
        "scores": "tqa-scores.jsonl",
    }
    assert config.datasets["xsum"] == {"records": "xsum.jsonl"}


def test_overrides_beat_file_values(tmp_path):
    path = write_config(tmp_path, '[run]\nstrategy = "best"\n')
    config = load_config(path, {"run.strategy": "random", "evaluation.max_rejection": 0.4})
    assert config.strategy == "random"
    assert config.max_rejection == 0.4


def test_none_overrides_are_ignored(tmp_path):
    path = write_config(tmp_path, '[run]\nstrategy = "best"\n')
    config = load_config(path, {"run.strategy": None})
    assert config.strategy == "best"


@pytest.mark.parametrize(
    "body, fragment",
    [
        ("[runs]\n", "unknown section"),
        ("[run]\nrecord = 'x'\n", "unknown key"),
        ("[run]\nestimators = ['bleu']\n", "unknown estimator"),
        ("[run]\nstrategy = 'middle'\n", "unknown target strategy"),
        ("[similarity]\nbackend = 'w2v'\n", "unknown similarity backend"),
        ("[evaluation]\nmax_rejection = 0.0\n", "max_rejection"),
        ("[evaluation]\nmax_rejection = 1.5\n", "max_rejection"),
        ("[run]\nsentence_sar_temperature = 0.0\n", "temperature"),
        ("[run]\nworkers = -1\n", "workers"),
        ("[evaluation.task_groups]\nqa = []\n", "empty"),
        ("[ablation]\nestimators = ['nope']\n", "ablation"),
        ("[ablation]\nstrategies = ['middle']\n", "ablation"),
        ("[synth]\nn_records = 0\n", "synth sizes"),
        ("[synth]\nrho = 1.5\n", "rho"),
        ("[synth]\noverlap = -0.1\n", "overlap"),
        ("[synth]\nregime = 'wild'\n", "regime"),
        ("[datasets]\nx = 3\n", "datasets"),
        ("[datasets.x]\nwrong = 'y'\n", "datasets.x"),
    ],
)
def test_invalid_configs_are_rejected(tmp_path, body, fragment):
    path = write_config(tmp_path, body)
    with pytest.raises(ConfigError) as err:
        load_config(path)
    assert fragment in str(err.value)


def test_invalid_toml_is_a_config_error(tmp_path):
    path = write_config(tmp_path, "not toml ][")
    with pytest.raises(ConfigError) as err:
        load_config(path)
    assert "invalid TOML" in str(err.value)


def test_missing_file_is_a_config_error(tmp_path):
    with pytest.raises(ConfigError) as err:
        load_config(tmp_path / "absent.toml")
    assert "cannot read" in str(err.value)


def test_endpoint_falls_back_to_environment(monkeypatch):
    monkeypatch.setenv(ENDPOINT_ENV, "http://127.0.0.1:9999")
    assert load_config().similarity.endpoint == "http://127.0.0.1:9999"

    monkeypatch.delenv(ENDPOINT_ENV)
    assert load_config().similarity.endpoint is None


def test_explicit_endpoint_wins_over_environment(tmp_path, monkeypatch):
    monkeypatch.setenv(ENDPOINT_ENV, "http://fallback")
    path = write_config(tmp_path, '[similarity]\nendpoint = "http://explicit"\n')
    assert load_config(path).similarity.endpoint == "http://explicit"


def test_default_task_groups_are_not_shared():
    a = load_config()
    a.task_groups["qa"].append("extra")
    assert load_config().task_groups == DEFAULT_TASK_GROUPS
    assert RunConfig().task_groups["qa"][-1] != "extra"
