import lcplab


def test_temporal_weight():
    assert lcplab.temporal_weight(0.5, 1.0) == 0.25


def test_m_inf():
    assert abs(lcplab.m_inf(0.25, 0.5, 1.0) - 0.1875) < 1e-15
