import pytest
from hypothesis import given, settings, strategies as st

from abr_uili.policies import PolicyKind, PolicyVariant
from abr_uili.protocol import (Direction, ProtocolError, RmCell, SourceParams, SourceState,
                               atdf_check, des_turnaround, measure_sr, next_cell_departure,
                               on_brm_receive, on_frm_send)
from abr_uili.units import mbps_to_cps, ms, us

PCR = mbps_to_cps(155.52)


def params(**kw):
    base = dict(pcr=PCR, mcr=0.0, icr=2_359, headroom=2_359, tdf=0.125)
    base.update(kw)
    return SourceParams(**base)


def brm(er, vc=0, ni=False):
    return RmCell(vc, Direction.BACKWARD, ccr=0.0, er=er, ni=ni)


COUNT = PolicyVariant(PolicyKind.COUNT_BASED)


def test_departure_gap():
    s = SourceState(0, acr=mbps_to_cps(10))
    assert next_cell_departure(s, True, 0) == 42_400
    s.acr = PCR
    assert next_cell_departure(s, True, 1000) == 1000 + 2_726
    assert next_cell_departure(s, False, 0) is None
    assert next_cell_departure(s, True, 0, cap=mbps_to_cps(10)) == 42_400


def test_measure_sr():
    assert measure_sr(32, ms(3.2)) == pytest.approx(10_000)
    assert measure_sr(32, 87_200) == pytest.approx(366_972, abs=1)
    assert measure_sr(32, ms(1000)) == pytest.approx(32)
    with pytest.raises(ProtocolError):
        measure_sr(32, 0)


def _steady_frm(state, p, policy, acr, sr_cells_per_s, now=ms(100)):
    """Prime ``state`` so the next FRM at ``now`` measures exactly ``sr``."""
    state.acr = acr
    state.frms_sent = 1
    state.cells_since_frm = p.nrm - 1
    state.last_frm_at = now - round(p.nrm / sr_cells_per_s * 1e9)
    return on_frm_send(state, p, policy, now)


def test_frm_count_based_reduction():
    p = params()
    s = SourceState(0, acr=0)
    triggered, rm = _steady_frm(s, p, COUNT, 66_038, 23_585)
    assert triggered
    assert s.acr == pytest.approx(66_038 * 0.875)
    assert rm.direction is Direction.FORWARD and rm.ccr == s.acr and rm.er == p.pcr
    assert not s.acr_ok


def test_frm_pr5_skips_and_clears():
    p = params()
    s = SourceState(0, acr=0, pr5=True)
    triggered, _ = _steady_frm(s, p, PolicyVariant(PolicyKind.COUNT_BASED, use_pr5=True),
                               66_038, 23_585)
    assert not triggered and not s.pr5 and s.acr == 66_038


def test_frm_tdf_zero():
    p = params(tdf=0.0)
    s = SourceState(0, acr=0)
    triggered, _ = _steady_frm(s, p, COUNT, 66_038, 23_585)
    assert not triggered and s.acr_ok and s.acr == 66_038


def test_first_frm_is_not_tested():
    p = params()
    s = SourceState.initial(0, p)
    s.acr = PCR
    triggered, _ = on_frm_send(s, p, COUNT, ms(10))
    assert not triggered and s.frms_sent == 1 and s.last_sr is None


def test_brm_no_increase_outside_acr_ok():
    s = SourceState(0, acr=57_783, acr_ok=False)
    on_brm_receive(s, params(), COUNT, brm(65_989))
    assert s.acr == 57_783


def test_brm_increase_then_clamp_to_er():
    s = SourceState(0, acr=57_783, acr_ok=True)
    on_brm_receive(s, params(), COUNT, brm(65_989))
    assert s.acr == 65_989
    assert s.pr5


def test_brm_low_er_always_applies():
    for ok in (True, False):
        s = SourceState(0, acr=57_783, acr_ok=ok)
        on_brm_receive(s, params(), COUNT, brm(2_359))
        assert s.acr == 2_359


def test_brm_direction_and_vc_checked():
    s = SourceState(0, acr=1000)
    with pytest.raises(ProtocolError):
        on_brm_receive(s, params(), COUNT, RmCell(0, Direction.FORWARD, 0, 1))
    with pytest.raises(ProtocolError):
        on_brm_receive(s, params(), COUNT, brm(1, vc=3))


def test_des_turnaround_preserves_fields():
    fwd = RmCell(4, Direction.FORWARD, ccr=1.5, er=65_989, ni=True)
    back = des_turnaround(fwd)
    assert (back.vc, back.ccr, back.er, back.ni) == (4, 1.5, 65_989, True)
    assert back.direction is Direction.BACKWARD
    with pytest.raises(ProtocolError):
        des_turnaround(back)


def test_atdf_timeout():
    p = params(atdf=ms(500), icr=mbps_to_cps(10))
    s = SourceState(0, acr=mbps_to_cps(50), last_activity_at=0)
    assert not atdf_check(s, p, ms(400))
    assert s.acr == mbps_to_cps(50)
    assert atdf_check(s, p, ms(600))
    assert s.acr == p.icr
    assert not atdf_check(s, p, ms(1200))
    assert s.acr == p.icr


def test_atdf_never_raises():
    p = params(atdf=ms(500), icr=mbps_to_cps(10))
    s = SourceState(0, acr=mbps_to_cps(2), last_activity_at=0)
    assert not atdf_check(s, p, ms(900))
    assert s.acr == mbps_to_cps(2)


def test_param_validation():
    with pytest.raises(ValueError):
        params(mcr=PCR * 2)
    with pytest.raises(ValueError):
        params(nrm=1)
    with pytest.raises(ValueError):
        params(rif=0)
    assert params().delta == pytest.approx(PCR * PCR / 1e9)


def test_region_b_absorbs_increases():
    """A count-based source in region B ignores ER increases until it uses its rate."""
    p = params(headroom=mbps_to_cps(1))
    s = SourceState(0, acr=0)
    sr = mbps_to_cps(10)
    _steady_frm(s, p, COUNT, sr + mbps_to_cps(0.5), sr)
    assert not s.acr_ok
    for k in range(20):
        held = s.acr
        on_brm_receive(s, p, COUNT, brm(PCR))
        assert s.acr == held
        _steady_frm(s, p, COUNT, s.acr, sr, now=ms(200 + k))
        assert s.acr == held


def test_joint_rises_after_one_ignored_brm_while_count_based_holds():
    p = params(headroom=2_359, tdf=1 / 16)
    sr = 23_585
    runs = {}
    for kind in (PolicyKind.JOINT, PolicyKind.COUNT_BASED):
        v = PolicyVariant(kind)
        s = SourceState(0, acr=0)
        _steady_frm(s, p, v, 66_038, sr)
        trace = [s.acr]
        for _ in range(3):
            on_brm_receive(s, p, v, brm(80_000))
            trace.append(s.acr)
        runs[kind] = trace
    joint, count = runs[PolicyKind.JOINT], runs[PolicyKind.COUNT_BASED]
    assert joint[1] == joint[0] and joint[2] == 80_000
    assert count[1:] == [count[0]] * 3


EVENTS = st.lists(
    st.one_of(
        st.tuples(st.just("frm"), st.integers(1, 31), st.integers(us(50), ms(300))),
        st.tuples(st.just("brm"), st.floats(1, 2 * PCR), st.booleans()),
        st.tuples(st.just("idle"), st.integers(0, ms(900)), st.just(None)),
    ),
    max_size=40,
)


@settings(max_examples=150, deadline=None)
@given(kind=st.sampled_from(list(PolicyKind)), mcr=st.floats(0, 5_000),
       tdf=st.sampled_from([0.0, 1 / 16, 0.125, 0.5]), pr5=st.booleans(), events=EVENTS)
def test_acr_stays_within_mcr_pcr(kind, mcr, tdf, pr5, events):
    p = params(mcr=mcr, icr=max(mcr, 2_359), tdf=tdf)
    v = PolicyVariant(kind, use_pr5=pr5)
    s = SourceState.initial(0, p)
    now = 0
    for ev in events:
        if ev[0] == "frm":
            now += ev[2]
            s.cells_since_frm = ev[1]
            on_frm_send(s, p, v, now)
        elif ev[0] == "brm":
            on_brm_receive(s, p, v, brm(ev[1], ni=ev[2]), now)
        else:
            now += ev[1]
            atdf_check(s, p, now)
        assert p.mcr <= s.acr <= p.pcr
