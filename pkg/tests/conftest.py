"""Shared helpers: finite-difference gradient checking and small corpora."""
import numpy as np
import pytest

import hatedetect.autograd as ag


def fd_check(build, params, rng, step=1e-5, rel_tol=1e-4, n_coords=4):
    """Compare analytic gradients against central differences.

    build() must construct a fresh scalar loss graph from the live
    parameter arrays on every call.  For each parameter a few coordinates
    are perturbed in place.  Returns the worst relative error seen.
    """
    for p in params:
        p.grad = None
    loss = build()
    ag.backward(loss)
    grads = [p.grad.copy() if p.grad is not None else np.zeros_like(p.data)
             for p in params]
    for p in params:
        p.grad = None
    worst = 0.0
    for p, g in zip(params, grads):
        flat = p.data.reshape(-1)
        gf = g.reshape(-1)
        if flat.size <= n_coords:
            coords = range(flat.size)
        else:
            coords = rng.choice(flat.size, size=n_coords, replace=False)
        for k in coords:
            orig = flat[k]
            flat[k] = orig + step
            fp = float(build().data)
            flat[k] = orig - step
            fm = float(build().data)
            flat[k] = orig
            numeric = (fp - fm) / (2.0 * step)
            denom = max(abs(numeric), abs(gf[k]))
            if denom < 1e-7:
                err = abs(numeric - gf[k])
            else:
                err = abs(numeric - gf[k]) / denom
            assert err < rel_tol, (
                f"gradient mismatch at coord {k}: analytic {gf[k]:.8g} "
                f"numeric {numeric:.8g} rel err {err:.3g}")
            worst = max(worst, err)
    return worst


@pytest.fixture
def rng():
    return np.random.default_rng(0)


@pytest.fixture(scope="session")
def tiny_world():
    """A small generated corpus shared by read-only tests."""
    from hatedetect import synth
    cfg = synth.SynthConfig(n_users=30, posts_per_user=4, vocab_size=300,
                            history_posts_per_user=5)
    return synth.gen_synthetic(cfg, seed=11)
