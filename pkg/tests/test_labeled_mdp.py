import random

import numpy as np
import pytest

from mdprm.envs import laundry_layout
from mdprm.errors import LabelError, ValidationError
from mdprm.labeled_mdp import (
    TRIPLE,
    JointState,
    LabeledMdp,
    Mdprm,
    label_of,
    mdprm_from_json,
    mdprm_to_json,
    sample_joint,
    step_env,
    validate_mdp,
)
from mdprm.rm import EMPTY, RewardMachine


def test_one_state_empty_forever():
    mdp = LabeledMdp(1, 1, {(0, 0): [(0, 1.0)]}, {(0, 0): EMPTY})
    m = Mdprm(mdp, RewardMachine(1, ["EMPTY"], {}, {}))
    rng = random.Random(0)
    s = JointState(0, 0)
    for _ in range(100):
        tr = step_env(m, s, 0, rng)
        assert (tr.o_next, tr.q_next, tr.reward, tr.label) == (0, 0, 0.0, EMPTY)
        s = JointState(tr.q_next, tr.o_next)


def test_laundry_wall_reflects(laundry):
    lay = laundry_layout()
    corner = lay.cell(0, 0)  # moving up or left from the top-left corner hits the boundary
    rows = {o2: p for o2, p in laundry.mdp.P[(corner, 0)]}
    assert rows[corner] == pytest.approx(1.0 - 0.15)  # up blocked, left slip blocked
    # the interior wall only opens at the door column
    above = lay.cell(lay.wall_row - 1, 0)
    assert dict(laundry.mdp.P[(above, 2)]).get(above, 0.0) >= 0.7


def test_cycle_o1_action0_goes_clockwise(cycle6):
    rng = random.Random(3)
    for q in range(6):
        for _ in range(50):
            tr = step_env(cycle6, JointState(q, 1), 0, rng)
            assert tr.label == cycle6.rm.label_index("A")
            assert tr.q_next == (q + 1) % 6


def test_pairwise_ignores_next(cycle6):
    assert label_of(cycle6, 1, 1) == label_of(cycle6, 1, 1, 0) == label_of(cycle6, 1, 1, 1)


def test_lower_bound_triple_labels(lower_bound):
    oA = lower_bound.O - 2
    A, AB = lower_bound.rm.label_index("A"), lower_bound.rm.label_index("AB")
    for a in range(lower_bound.A):
        assert label_of(lower_bound, oA, a, 0) == A
        assert label_of(lower_bound, oA, a, oA) == AB
    with pytest.raises(LabelError):
        label_of(lower_bound, oA, 0)


def test_near_unit_row_renormalized():
    mdp = LabeledMdp(2, 1, {(0, 0): [(0, 0.5), (1, 0.5000000001)], (1, 0): [(0, 1.0)]},
                     {(0, 0): 0, (1, 0): 0})
    assert validate_mdp(mdp).ok
    assert sum(p for _, p in mdp.P[(0, 0)]) == pytest.approx(1.0, abs=1e-15)


def test_off_row_rejected():
    with pytest.raises(ValidationError):
        LabeledMdp(2, 1, {(0, 0): [(0, 0.5), (1, 0.4)], (1, 0): [(0, 1.0)]}, {(0, 0): 0, (1, 0): 0})


def test_missing_label_reported():
    mdp = LabeledMdp(2, 1, {(0, 0): [(1, 1.0)], (1, 0): [(0, 1.0)]}, {(0, 0): 0}, validate=False)
    rep = validate_mdp(mdp)
    assert "missing-label" in rep.kinds()
    tri = LabeledMdp(2, 1, {(0, 0): [(1, 1.0)], (1, 0): [(0, 1.0)]}, {(0, 0, 1): 0},
                     mode=TRIPLE, validate=False)
    assert [v.where for v in validate_mdp(tri) if v.kind == "missing-label"] == [(1, 0, 0)]


def test_shipped_envs_valid(cycle6, laundry, lower_bound, small_random):
    for m in (cycle6, laundry, lower_bound, small_random):
        assert validate_mdp(m.mdp).ok


def test_label_outside_alphabet():
    mdp = LabeledMdp(1, 1, {(0, 0): [(0, 1.0)]}, {(0, 0): 5})
    with pytest.raises(LabelError):
        Mdprm(mdp, RewardMachine(1, ["EMPTY"], {}, {}))


def test_encode_decode(laundry):
    for s in range(laundry.S):
        q, o = laundry.decode(s)
        assert laundry.encode(q, o) == s


def test_sample_joint_matches_step_distribution(laundry):
    s = JointState(3, laundry_layout().cell(*laundry_layout().machine))
    x = sample_joint(laundry, s, 0, 20_000, seed=1)
    assert set(np.unique(x[:, 1])) <= {3, 5}
    assert np.mean(x[:, 1] == 5) == pytest.approx(0.95, abs=0.01)


def test_document_round_trip(laundry, lower_bound):
    for m in (laundry, lower_bound):
        back = mdprm_from_json(mdprm_to_json(m))
        assert back.mdp.P == m.mdp.P
        assert back.mdp.labels == m.mdp.labels
        assert back.mdp.mode == m.mdp.mode
        assert back.init == m.init
        assert back.rm.tau == m.rm.tau
