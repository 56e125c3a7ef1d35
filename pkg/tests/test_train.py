import numpy as np
import pytest

from nie_lab.circuits import CircuitSpec, Gate, NoiseSetting, build_hea, build_ising_qnn
from nie_lab.qcore import pauli_string
from nie_lab.train import (
    AdamConfig, AdamState, Dataset, TrainConfig, adam_step, estimate_p_star_mse, gen_sinusoidal,
    gen_sinusoidal2, grad_loss, load_csv_dataset, loss_and_grad, mse, read_dataset_csv, train_run,
    write_dataset_csv,
)


def test_split_sizes():
    ds = gen_sinusoidal(0)
    assert (len(ds.train_idx), len(ds.test_idx)) == (15, 35)
    ds2 = gen_sinusoidal2(0)
    assert (len(ds2.train_idx), len(ds2.test_idx)) == (15, 5)


def test_labels_scaled_on_train_rows():
    ds = gen_sinusoidal(3)
    assert ds.y_train.min() == pytest.approx(-1.0) and ds.y_train.max() == pytest.approx(1.0)
    assert set(ds.train_idx).isdisjoint(ds.test_idx)
    assert sorted(np.concatenate([ds.train_idx, ds.test_idx])) == list(range(50))


def test_noise_free_labels():
    ds = gen_sinusoidal(1, noise_amp=0.0)
    np.testing.assert_allclose(ds.raw_labels, np.sin(np.pi * ds.raw_features[:, 0]))


def test_degenerate_split():
    with pytest.raises(ValueError):
        gen_sinusoidal(0, m_total=2, train_fraction=0.1)


def test_mse_examples():
    assert mse([0.3, 0.4], [0.3, 0.4]) == 0.0
    assert mse([0.0, 1.0], [0.0, 0.0]) == 0.5
    y = np.array([0.2, -0.4, 1.0])
    c = 0.1
    assert mse(np.full(3, c), y) == pytest.approx(np.mean((y - c) ** 2))
    with pytest.raises(ValueError):
        mse([], [])


def test_csv_loading(tmp_path):
    path = tmp_path / "d.csv"
    path.write_text("bmi,ltg,target\n20,4.1,100\n25,4.5,150\n30,5.0,90\n27,4.8,200\n")
    ds = load_csv_dataset(path, ["bmi", "ltg"], "target", 3, seed=0)
    assert ds.features[ds.train_idx].min() == pytest.approx(-np.pi)
    assert ds.features[ds.train_idx].max() == pytest.approx(np.pi)
    back = ds.feature_scaler.inverse_transform(ds.features)
    np.testing.assert_allclose(back, ds.raw_features, atol=1e-12)
    labels = ds.label_scaler.inverse_transform(ds.labels[:, None])[:, 0]
    np.testing.assert_allclose(labels, ds.raw_labels, atol=1e-12)


def test_csv_errors(tmp_path):
    path = tmp_path / "d.csv"
    path.write_text("a,b\n1,2\n3,x\n1,5\n")
    with pytest.raises(ValueError, match="row 3"):
        load_csv_dataset(path, ["a"], "b", 2, 0)
    with pytest.raises(ValueError, match="column"):
        load_csv_dataset(path, ["zz"], "b", 2, 0)
    path.write_text("a,b\n1,2\n1,3\n1,5\n")
    with pytest.raises(ValueError, match="zero"):
        load_csv_dataset(path, ["a"], "b", 2, 0)


def test_dataset_csv_roundtrip(tmp_path):
    ds = gen_sinusoidal(4)
    write_dataset_csv(ds, tmp_path / "ds.csv")
    back = read_dataset_csv(tmp_path / "ds.csv")
    np.testing.assert_array_equal(back.train_idx, ds.train_idx)
    np.testing.assert_allclose(back.labels, ds.labels, atol=1e-14)


def test_dataset_rejects_overlap():
    x = np.zeros((3, 1))
    with pytest.raises(ValueError):
        Dataset("d", x, np.zeros(3), np.array([0, 1]), np.array([1, 2]), x, np.zeros(3), None, None, {})


def fd_loss_grad(spec, xs, ys, theta, noise, h=1e-5):
    out = np.zeros_like(theta)
    for i in range(theta.size):
        e = np.zeros_like(theta)
        e[i] = h
        out[i] = (loss_and_grad(spec, xs, ys, theta + e, noise)[0] - loss_and_grad(spec, xs, ys, theta - e, noise)[0]) / (2 * h)
    return out


@pytest.mark.parametrize("kind", ["dp", "pd", "ad"])
def test_gradient_matches_finite_differences(kind, rng):
    spec = build_ising_qnn(1)
    xs = rng.uniform(-1, 1, (3, 2))
    ys = rng.uniform(-1, 1, 3)
    theta = rng.uniform(0, 2 * np.pi, spec.n_params)
    noise = NoiseSetting(kind, 0.03)
    np.testing.assert_allclose(grad_loss(spec, xs, ys, theta, noise), fd_loss_grad(spec, xs, ys, theta, noise), atol=1e-6)


def test_gradient_zero_at_minimum():
    spec = CircuitSpec(1, (Gate("RX", (0,), param=0),), 1, 1, pauli_string("Z"))
    # f = cos(theta); theta = 0 minimizes (f - 1)^2
    g = grad_loss(spec, np.zeros((1, 1)), np.array([1.0]), np.array([0.0]))
    assert abs(g[0]) < 1e-8


def test_adam_first_step():
    theta, state = adam_step(np.array([1.0]), np.array([2.0]), AdamState.zeros(1))
    assert theta[0] == pytest.approx(1.0 - 0.01 * 2 / (2 + 1e-8), abs=1e-15)
    assert state.t == 1


def test_adam_zero_gradient():
    theta, state = np.array([0.3, -1.0]), AdamState.zeros(2)
    for _ in range(20):
        theta, state = adam_step(theta, np.zeros(2), state)
    np.testing.assert_array_equal(theta, [0.3, -1.0])


def test_adam_config_validation():
    with pytest.raises(ValueError):
        AdamConfig(lr=0.0)
    with pytest.raises(ValueError):
        AdamConfig(beta1=1.0)


def test_history_length_and_determinism():
    ds = gen_sinusoidal(0)
    cfg = TrainConfig(layers=1, p=0.01, epochs=4, seed=3)
    a, b = train_run(cfg, ds), train_run(cfg, ds)
    assert len(a.train_mse) == len(a.test_mse) == 5
    assert a.train_mse.tobytes() == b.train_mse.tobytes()
    assert a.test_mse.tobytes() == b.test_mse.tobytes()
    assert a.theta_final.tobytes() == b.theta_final.tobytes()


def test_statevector_engine_agrees_with_density():
    ds = gen_sinusoidal(2)
    a = train_run(TrainConfig(layers=1, p=0.0, epochs=3, seed=1), ds)
    b = train_run(TrainConfig(layers=1, p=0.0, epochs=3, seed=1, engine="statevector"), ds)
    np.testing.assert_allclose(a.train_mse, b.train_mse, atol=1e-10)


def test_overparameterized_training_progresses():
    ds = gen_sinusoidal(0)
    h = train_run(TrainConfig(layers=10, p=0.0, epochs=10, seed=0), ds)
    assert h.final_train_mse < h.train_mse[0]


def test_p_star_mse_examples():
    assert estimate_p_star_mse({(0.002, 0): 0.1, (0.004, 0): 0.2, (0.002, 1): 0.1, (0.004, 1): 0.3})[:2] == (0.002, 0.0)
    mono = {(p, s): 1.0 + p + s for p in (0.001, 0.01, 0.1) for s in range(3)}
    assert estimate_p_star_mse(mono)[0] == 0.001
    with pytest.raises(ValueError, match="2 seeds"):
        estimate_p_star_mse({(0.001, 0): 1.0, (0.01, 0): 2.0})
    with pytest.raises(ValueError, match="missing"):
        estimate_p_star_mse({(0.001, 0): 1.0, (0.01, 0): 2.0, (0.001, 1): 1.0})
