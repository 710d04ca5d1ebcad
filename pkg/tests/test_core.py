import numpy as np
import pytest

from gsmdetect.channel import ChannelRealization, draw_correlated, snr_to_sigma2
from gsmdetect.core import DETECTORS, HAVE_COMPILED, detect_block
from gsmdetect.detectors import PbldParams
from gsmdetect.gsm import SystemConfig

needs_compiled = pytest.mark.skipif(not HAVE_COMPILED, reason="compiled core not built")

CASES = [((4, 2, 4, 4), 0.0), ((7, 4, 7, 4), 0.0), ((8, 3, 8, 4), 0.0),
         ((7, 4, 7, 4), 0.5), ((5, 2, 3, 16), 0.0), ((16, 2, 4, 4), 0.0)]


def _block(sysc, delta, snr, rng, n_uses=40):
    h = draw_correlated(sysc.n_r, sysc.n_t, delta, rng)
    chan = ChannelRealization(h, sysc.table)
    sigma2 = snr_to_sigma2(snr, sysc.n_a)
    y = (rng.standard_normal((n_uses, sysc.n_r)) + 1j * rng.standard_normal((n_uses, sysc.n_r)))
    y = y * np.sqrt(sysc.n_a / 2 + sigma2 / 2)
    return chan, y, sigma2, PbldParams().rule(sysc.n_c, snr)


@needs_compiled
@pytest.mark.parametrize("geo,delta", CASES)
@pytest.mark.parametrize("snr", [0.0, 10.0, 20.0])
def test_backends_agree(geo, delta, snr, rng):
    sysc = SystemConfig(*geo)
    for _ in range(3):
        chan, y, sigma2, rule = _block(sysc, delta, snr, rng)
        a, pa, ua = detect_block(chan, sysc.constellation, y, sigma2, rule, DETECTORS,
                                 backend="compiled")
        b, pb, ub = detect_block(chan, sysc.constellation, y, sigma2, rule, DETECTORS,
                                 backend="python")
        assert (ua, ub) == ("compiled", "python")
        for name in DETECTORS:
            for key in ("k", "labels", "examined", "final_len", "flops", "monotone", "valid"):
                np.testing.assert_array_equal(a[name][key], b[name][key], err_msg=f"{name}.{key}")
            np.testing.assert_allclose(a[name]["eps"], b[name]["eps"], rtol=1e-12)
            assert pa[name] == pb[name]


@needs_compiled
def test_degenerate_falls_back(rng):
    sysc = SystemConfig(4, 2, 4)
    h = np.zeros((4, 4), complex)
    h[:, 0] = h[:, 1] = 1.0  # combination (0, 1) is rank one
    h[:, 2:] = rng.standard_normal((4, 2))
    chan = ChannelRealization(h, sysc.table)
    y = rng.standard_normal((5, 4)) + 0j
    out, prep, used = detect_block(chan, sysc.constellation, y, 0.5,
                                   PbldParams().rule(4, 5.0), DETECTORS)
    assert used == "python"
    assert np.all(out["pbld"]["valid"] == 1)


def test_subset_and_unknown(rng):
    sysc = SystemConfig(4, 2, 4)
    chan, y, sigma2, rule = _block(sysc, 0.0, 5.0, rng, n_uses=3)
    out, prep, _ = detect_block(chan, sysc.constellation, y, sigma2, rule, ("pbld",))
    assert set(out) == {"pbld"} == set(prep)
    with pytest.raises(ValueError):
        detect_block(chan, sysc.constellation, y, sigma2, rule, ("mmse",))


def test_single_vector_input(rng):
    sysc = SystemConfig(4, 2, 4)
    chan, y, sigma2, rule = _block(sysc, 0.0, 5.0, rng, n_uses=1)
    out, _, _ = detect_block(chan, sysc.constellation, y[0], sigma2, rule, ("ml",))
    assert out["ml"]["k"].shape == (1,)
