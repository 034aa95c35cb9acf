import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from seqpol.errors import ConfigError
from seqpol.staterep import (
    StateSpec,
    aggregate_history,
    assemble_state,
    enumerate_standard_states,
    truncate_history,
)

from conftest import encoded_episode_set


class TestStateSpec:
    def test_empty_spec_rejected(self):
        with pytest.raises(ConfigError, match="empty state spec"):
            StateSpec()

    def test_window_implies_current_and_prev(self):
        spec = StateSpec(window_k=2)
        assert spec.include_current_context and spec.include_prev_action

    def test_json_round_trip(self, tmp_path):
        spec = StateSpec(window_k=1, aggregate_op="max")
        path = tmp_path / "spec.json"
        path.write_text(json.dumps(spec.to_dict()))
        assert StateSpec.from_json(str(path)) == spec

    def test_names_are_self_describing(self):
        assert StateSpec(include_current_context=True).name == "current"
        assert StateSpec(include_prev_action=True).name == "prev_action"
        assert StateSpec(window_k=0).name == "window0"
        assert StateSpec(aggregate_op="sum").name == "agg_sum"
        assert StateSpec(window_k=2, aggregate_op="mean").name == "window2+agg_mean"


class TestEnumerateStandardStates:
    def test_returns_exactly_seven_in_order(self):
        specs = enumerate_standard_states("sum")
        assert len(specs) == 7
        assert specs[0] == StateSpec(include_current_context=True)
        assert specs[1] == StateSpec(include_prev_action=True)
        assert specs[2] == StateSpec(window_k=0)
        assert specs[3] == StateSpec(aggregate_op="sum")
        assert specs[4] == StateSpec(window_k=0, aggregate_op="sum")
        assert specs[5] == StateSpec(window_k=1, aggregate_op="sum")
        assert specs[6] == StateSpec(window_k=2, aggregate_op="sum")

    def test_operator_tags_aggregates(self):
        specs = enumerate_standard_states("max")
        assert all(s.aggregate_op == "max" for s in specs[3:])

    def test_bad_operator_rejected(self):
        with pytest.raises(ConfigError):
            enumerate_standard_states("none")


class TestAggregateHistory:
    def test_action_counts_sum(self, therapy_episodes):
        # therapy p1 has actions (MTX, TNF, MTX); at t=3 the prefix is stages 1..2
        ep = therapy_episodes.episodes[0]
        names, values = aggregate_history(ep, 3, "sum", therapy_episodes)
        got = dict(zip(names, values))
        assert got["action:MTX@agg_sum"] == 1.0
        assert got["action:TNF@agg_sum"] == 1.0
        assert got["action:JAK@agg_sum"] == 0.0

    def test_four_stage_prefix_counts(self, therapy_schema):
        eps = encoded_episode_set(
            therapy_schema,
            [("p", [({"age": 1.0, "cdai": 0.0, "crp": 0.0}, a, None)
                    for a in ("MTX", "TNF", "MTX", "JAK")])],
        )
        names, values = aggregate_history(eps.episodes[0], 4, "sum", eps)
        got = dict(zip(names, values))
        # prefix of length 3: MTX, TNF, MTX
        assert (got["action:MTX@agg_sum"], got["action:TNF@agg_sum"],
                got["action:JAK@agg_sum"]) == (2.0, 1.0, 0.0)

    def test_numeric_max(self, therapy_episodes):
        ep = therapy_episodes.episodes[0]  # cdai: 3.2, 5.1, 4.0
        names, values = aggregate_history(ep, 3, "max", therapy_episodes)
        assert dict(zip(names, values))["cdai@agg_max"] == 5.1

    def test_empty_action_prefix_is_zero(self, therapy_episodes):
        ep = therapy_episodes.episodes[0]
        for op in ("sum", "max", "mean"):
            names, values = aggregate_history(ep, 1, op, therapy_episodes)
            acts = [v for n, v in zip(names, values) if n.startswith("action:")]
            assert acts == [0.0, 0.0, 0.0]

    def test_ineligible_variables_not_aggregated(self, therapy_episodes):
        ep = therapy_episodes.episodes[0]
        names, _ = aggregate_history(ep, 2, "sum", therapy_episodes)
        assert not any(n.startswith("age@") for n in names)

    def test_length_one_prefix_max_is_identity(self, therapy_episodes):
        ep = therapy_episodes.episodes[0]
        names, values = aggregate_history(ep, 1, "max", therapy_episodes)
        got = dict(zip(names, values))
        assert got["cdai@agg_max"] == ep.stages[0].context["cdai"]

    @given(
        values=st.lists(
            st.floats(min_value=-10, max_value=10, allow_nan=False),
            min_size=2,
            max_size=8,
        ),
        t=st.integers(min_value=2, max_value=8),
    )
    @settings(max_examples=40, deadline=None)
    def test_sum_prefix_recurrence(self, values, t):
        from conftest import THERAPY_ACTIONS
        from seqpol.schema import CohortSchema, VariableSpec

        schema = CohortSchema(
            variables=(VariableSpec("age", aggregate_eligible=False, lag_eligible=False),
                       VariableSpec("cdai"), VariableSpec("crp")),
            action_labels=THERAPY_ACTIONS,
            default_action="MTX",
        )
        t = min(t, len(values))
        stages = [
            ({"age": 0.0, "cdai": v, "crp": 0.0}, "MTX", None) for v in values
        ]
        eps = encoded_episode_set(schema, [("p", stages)])
        ep = eps.episodes[0]
        names, now = aggregate_history(ep, t, "sum", eps)
        _, before = aggregate_history(ep, t - 1, "sum", eps)
        idx = names.index("cdai@agg_sum")
        assert now[idx] == pytest.approx(before[idx] + values[t - 1])


class TestTruncateHistory:
    def test_t1_padding(self, therapy_episodes):
        ep = therapy_episodes.episodes[0]
        names, values = truncate_history(ep, 1, 2, therapy_episodes)
        got = dict(zip(names, values))
        # lagged contexts repeat the first observation
        assert got["cdai@lag1"] == got["cdai@lag2"] == ep.stages[0].context["cdai"]
        # all lagged actions are the default action (MTX)
        for lag in (1, 2, 3):
            assert got[f"action:MTX@lag{lag}"] == 1.0

    def test_k0_is_current_plus_prev_action(self, therapy_episodes):
        ep = therapy_episodes.episodes[0]
        names, values = truncate_history(ep, 3, 0, therapy_episodes)
        got = dict(zip(names, values))
        assert set(names) == {
            "age", "cdai", "crp",
            "action:MTX@lag1", "action:TNF@lag1", "action:JAK@lag1",
        }
        assert got["action:TNF@lag1"] == 1.0  # A_2 = TNF

    def test_k1_index_arithmetic(self, therapy_episodes):
        ep = therapy_episodes.episodes[0]
        names, values = truncate_history(ep, 3, 1, therapy_episodes)
        got = dict(zip(names, values))
        assert got["cdai"] == 4.0  # X_3
        assert got["cdai@lag1"] == 5.1  # X_2
        assert got["action:TNF@lag1"] == 1.0  # A_2
        assert got["action:MTX@lag2"] == 1.0  # A_1
        assert not any(n.startswith("age@lag") for n in names)

    def test_no_padding_beyond_window(self, therapy_schema):
        stages = [
            ({"age": 0.0, "cdai": float(i), "crp": 0.0}, "TNF", None)
            for i in range(1, 6)
        ]
        eps = encoded_episode_set(therapy_schema, [("p", stages)])
        ep = eps.episodes[0]
        names, values = truncate_history(ep, 4, 2, eps)
        got = dict(zip(names, values))
        # t=4 > k+1=3: every lag resolves to a real stage, no stage-1 repeats
        assert (got["cdai"], got["cdai@lag1"], got["cdai@lag2"]) == (4.0, 3.0, 2.0)
        assert got["action:TNF@lag3"] == 1.0  # A_1 was TNF, not padded MTX


class TestAssembleState:
    def test_current_only_shape(self, therapy_episodes):
        m = assemble_state(therapy_episodes, StateSpec(include_current_context=True))
        assert m.X.shape == (6, 3)
        assert m.feature_names == ["age", "cdai", "crp"]

    def test_prev_action_only_padding(self, therapy_episodes):
        m = assemble_state(therapy_episodes, StateSpec(include_prev_action=True))
        assert m.X.shape == (6, 3)
        assert np.all(m.X.sum(axis=1) == 1.0)
        # stage-1 rows encode the default action MTX
        t1 = m.stages == 1
        assert np.all(m.X[t1, 0] == 1.0)

    def test_window_k0_bit_identical_to_current_plus_prev(self, therapy_episodes):
        a = assemble_state(therapy_episodes, StateSpec(window_k=0))
        b = assemble_state(
            therapy_episodes,
            StateSpec(include_current_context=True, include_prev_action=True),
        )
        assert a.feature_names == b.feature_names
        assert np.array_equal(a.X, b.X)

    def test_window_plus_agg_is_column_union(self, therapy_episodes):
        combined = assemble_state(
            therapy_episodes, StateSpec(window_k=1, aggregate_op="sum")
        )
        ep = therapy_episodes.episodes[0]
        tr_names, tr_vals = truncate_history(ep, 2, 1, therapy_episodes)
        ag_names, ag_vals = aggregate_history(ep, 2, "sum", therapy_episodes)
        assert set(combined.feature_names) == set(tr_names) | set(ag_names)
        row = dict(zip(combined.feature_names, combined.X[1]))  # p1, t=2
        expected = dict(zip(tr_names, tr_vals)) | dict(zip(ag_names, ag_vals))
        for name, value in expected.items():
            assert row[name] == pytest.approx(value), name

    def test_row_count_is_total_stages(self, therapy_episodes):
        for spec in enumerate_standard_states("mean"):
            m = assemble_state(therapy_episodes, spec)
            assert m.n_rows == therapy_episodes.n_stages

    def test_rows_sorted_by_patient_then_stage(self, therapy_episodes):
        m = assemble_state(therapy_episodes, StateSpec(include_current_context=True))
        order = list(zip(m.patient_ids, m.stages))
        assert order == sorted(order)

    def test_mean_action_aggregate_is_prefix_fraction(self, therapy_schema):
        stages = [
            ({"age": 0.0, "cdai": 0.0, "crp": 0.0}, a, None)
            for a in ("TNF", "TNF", "MTX", "JAK")
        ]
        eps = encoded_episode_set(therapy_schema, [("p", stages)])
        m = assemble_state(eps, StateSpec(aggregate_op="mean"))
        col = m.feature_names.index("action:TNF@agg_mean")
        assert m.X[:, col] == pytest.approx([0.0, 1.0, 1.0, 2.0 / 3.0])

    def test_requires_encoded_episodes(self, therapy_schema):
        from seqpol.schema import Episode, EpisodeSet, Stage

        raw = EpisodeSet(
            [Episode("p", [Stage({"age": 1.0}, "MTX")])], therapy_schema
        )
        with pytest.raises(ConfigError, match="numeric form"):
            assemble_state(raw, StateSpec(include_current_context=True))

    def test_csv_export_round_trip(self, therapy_episodes, tmp_path):
        m = assemble_state(therapy_episodes, StateSpec(window_k=0))
        path = tmp_path / "matrix.csv"
        m.to_csv(str(path))
        lines = path.read_text().strip().splitlines()
        assert len(lines) == 1 + m.n_rows
        header = lines[0].split(",")
        assert header[:5] == ["patient_id", "t", "action", "prev_action", "severity"]
        assert header[5:] == m.feature_names
