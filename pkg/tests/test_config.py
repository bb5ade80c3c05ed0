import pytest

from pganet.config import ConfigError, RunConfig, load_run_config, parse_assignments


def test_defaults_are_sized_for_the_toy_run():
    config = RunConfig()
    assert (config.lr, config.weight_decay, config.warmup_iters) == (3e-3, 5e-4, 100)
    assert (config.batch_p, config.batch_k) == (config.num_ids, 2)
    assert config.camera_noise == [0.2, 0.8]
    assert (config.beta, config.margin, config.smoothing) == (5e-4, 0.3, 0.1)
    assert (config.height, config.width, config.embed_dim) == (16, 8, 16)
    assert config.effective_reduced_dim is None
    assert config.corrupt_grid is None


def test_file_then_overrides(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text(
        "# toy run\n"
        "depth = 3\n"
        "\n"
        "neighbor_mode = eight   # diagonal neighbors\n"
        "seeds = 4, 5\n"
        "self_loops = yes\n"
        "lr = 0.01\n"
    )
    config = load_run_config(path, {"depth": "1", "seed": 7})
    assert config.depth == 1
    assert config.seed == 7
    assert config.neighbor_mode == "eight"
    assert config.seeds == [4, 5]
    assert config.self_loops is True
    assert config.lr == 0.01


def test_text_round_trip(tmp_path):
    config = load_run_config(overrides={"sweep_neighbors": "four, fully-connected", "verify_corrupt_grid": "3x4"})
    path = tmp_path / "config.txt"
    path.write_text(config.to_text())
    assert load_run_config(path) == config
    assert config.sweep_neighbors == ["four", "fully_connected"]
    assert config.corrupt_grid == (3, 4)


@pytest.mark.parametrize("line", ["colour = blue", "depth = two", "self_loops = maybe", "just words"])
def test_bad_lines(line):
    with pytest.raises(ConfigError):
        parse_assignments([line])


def test_line_number_in_message():
    with pytest.raises(ConfigError, match="run.cfg:2"):
        parse_assignments(["depth = 1", "oops"], source="run.cfg")


@pytest.mark.parametrize("overrides", [
    {"depth": -1},
    {"per_id": 3},
    {"num_ids": 1},
    {"smoothing": 1.0},
    {"batch_p": 9},
    {"batch_k": 1},
    {"metric": "manhattan"},
    {"neighbor_mode": "six"},
    {"bench_modes": "four, fully_connected"},
    {"bench_repeats": 2},
    {"verify_corrupt_grid": "3by4"},
    {"camera_noise": "0.5"},
    {"camera_noise": "0.1, -0.2"},
    {"seeds": ""},
])
def test_invalid_values(overrides):
    with pytest.raises(ConfigError):
        load_run_config(overrides=overrides)


def test_unknown_override_key():
    with pytest.raises(ConfigError, match="threads"):
        load_run_config(overrides={"threads": 4})


def test_missing_file(tmp_path):
    with pytest.raises(ConfigError, match="not found"):
        load_run_config(tmp_path / "absent.cfg")


def test_full_scale_recipe_is_reachable():
    config = load_run_config(overrides={"lr": "3e-4", "warmup_iters": "500", "batch_p": "4", "batch_k": "4"})
    assert (config.lr, config.warmup_iters, config.batch_p, config.batch_k) == (3e-4, 500, 4, 4)


def test_camera_noise_parses_floats(tmp_path):
    config = load_run_config(overrides={"camera_noise": "0.1, 0.3"})
    assert config.camera_noise == [0.1, 0.3]
    path = tmp_path / "config.txt"
    path.write_text(config.to_text())
    assert load_run_config(path).camera_noise == [0.1, 0.3]
