import numpy as np
import pytest
from hypothesis import given, strategies as st

from ensemble_ssl.ensemble import PseudoLabel
from ensemble_ssl.ipl import PoolState, ThresholdSchedule, current_tau, promote, recheck, training_view

from oracles import constant_bank, pool_fuzz


class TestTau:
    s = ThresholdSchedule()

    def test_start(self):
        assert current_tau(self.s, 0, 0.9) == 0.92

    def test_floor(self):
        assert current_tau(self.s, 20, 0.9) == 0.80

    def test_gate(self):
        assert all(current_tau(self.s, e, 0.5) == 0.92 for e in range(50))

    def test_mid_decay(self):
        assert abs(current_tau(self.s, 5, 0.75) - 0.87) < 1e-12

    @given(st.integers(0, 200), st.floats(0, 1))
    def test_bounds(self, epoch, acc):
        assert self.s.tau_min <= current_tau(self.s, epoch, acc) <= self.s.tau0

    def test_invalid(self):
        with pytest.raises(ValueError):
            ThresholdSchedule(tau0=0.7, tau_min=0.8)


def _state(n_human=20, n_unlabeled=30):
    return PoolState(list(range(n_human)), set(range(n_human, n_human + n_unlabeled)))


def _pl(i, conf, label=0, weight=1.0):
    return PseudoLabel(i, label, conf, weight)


class TestPromote:
    def test_cap_defers(self):
        state = _state()
        accepted = [_pl(20 + k, 0.9 + k / 1000) for k in range(15)]
        state, rep = promote(state, accepted)
        assert len(rep.admitted) == 10 and len(rep.deferred) == 5
        assert set(rep.admitted) == set(range(25, 35))
        assert rep.sizes == (20, 10, 20)

    def test_ties_by_id(self):
        state, rep = promote(_state(4), [_pl(23, 0.95), _pl(21, 0.95), _pl(22, 0.99)])
        assert rep.admitted == [22, 21] and rep.deferred == [23]

    def test_empty(self):
        state = _state()
        before = (list(state.human_labeled), set(state.unlabeled_remaining))
        state, rep = promote(state, [])
        assert (state.human_labeled, state.unlabeled_remaining) == before and not rep.admitted

    def test_duplicate(self):
        with pytest.raises(ValueError):
            promote(_state(), [_pl(21, 0.95), _pl(21, 0.97)])

    def test_not_unlabeled(self):
        with pytest.raises(ValueError):
            promote(_state(), [_pl(3, 0.95)])

    def test_overlap_rejected(self):
        with pytest.raises(ValueError):
            PoolState([1, 2], {2, 3})


class TestRecheck:
    tokens = np.zeros((60, 1), dtype=np.int64)

    def _promoted(self, label=0):
        state, _ = promote(_state(), [_pl(21, 0.95, label), _pl(22, 0.97, label)])
        return state

    def test_boundary_demotes(self):
        state, rep = recheck(self._promoted(), constant_bank(0.84), self.tokens, tau=0.90)
        assert sorted(rep.demoted) == [21, 22] and {21, 22} <= state.unlabeled_remaining

    def test_above_bound_kept(self):
        state, rep = recheck(self._promoted(), constant_bank(0.86), self.tokens, tau=0.90)
        assert rep.demoted == [] and rep.rechecked == 2

    def test_label_flip(self):
        # the ensemble now prefers class 0 while the stored label is 1
        state, rep = recheck(self._promoted(label=1), constant_bank(0.99), self.tokens, tau=0.01)
        assert sorted(rep.demoted) == [21, 22]

    def test_period(self):
        state = self._promoted()
        state.epoch = 3
        _, rep = recheck(state, constant_bank(0.1), self.tokens, tau=0.9)
        assert rep.skipped and len(state.pseudo_labeled) == 2

    def test_demoted_can_return(self):
        state, _ = recheck(self._promoted(), constant_bank(0.5), self.tokens, tau=0.9)
        state, rep = promote(state, [_pl(21, 0.99)])
        assert rep.admitted == [21]

    def test_fuzz(self):
        assert pool_fuzz(steps=300, seed=4) == 0


class TestTrainingView:
    def test_human_only(self):
        state = _state(4, 4)
        ids, y, w = training_view(state, {i: i % 2 for i in range(4)}, seed=1, epoch=0)
        assert sorted(ids) == [0, 1, 2, 3] and (w == 1).all()
        assert all(y[k] == ids[k] % 2 for k in range(4))

    def test_pseudo_weights(self):
        state, _ = promote(_state(4, 4), [_pl(5, 0.99, label=1, weight=0.75)])
        ids, y, w = training_view(state, {i: 0 for i in range(4)}, seed=1, epoch=0)
        k = list(ids).index(5)
        assert y[k] == 1 and w[k] == 0.75
        _, _, w1 = training_view(state, {i: 0 for i in range(4)}, 1, 0, uniform_weights=True)
        assert (w1 == 1).all()

    def test_shuffle_keyed_by_epoch(self):
        state = _state(50, 0)
        labels = {i: 0 for i in range(50)}
        a = training_view(state, labels, 3, 0)[0]
        assert np.array_equal(a, training_view(state, labels, 3, 0)[0])
        assert not np.array_equal(a, training_view(state, labels, 3, 1)[0])
