import numpy as np
import pytest

from pebbletree import (
    InfeasibleInstanceError,
    Instance,
    InstanceFormatError,
    TimedMove,
    TimedPlan,
    Tree,
    compute_demands,
    format_timed_plan,
    lower_bound,
    makespan,
    new_scheduler,
    parse_timed_plan,
    path_tree,
    process_node,
    random_instance,
    reconstruct_trajectories,
    root_tree,
    send_agent,
    solve_mapf,
    solve_mapf_with_state,
    sum_of_costs,
    validate_mapf,
)

FIG2_PLAN = [(0, 1, 0), (1, 3, 1), (2, 3, 2), (3, 5, 2), (4, 5, 3), (5, 6, 3)]


class TestSchedulerGolden:
    def test_fig2_plan(self, fig2):
        plan = solve_mapf(fig2, root=3)
        assert plan.to_list() == FIG2_PLAN
        assert makespan(plan) == 4
        assert sum_of_costs(plan, fig2) == 11

    def test_fig2_offsets_and_queues(self, fig2):
        _, state = solve_mapf_with_state(fig2, 3)
        assert state.s.tolist() == [0, 0, 2, 0, 3, 0, 0]
        assert [state.l_values(u) for u in range(7)] == [
            [0], [1], [2], [2, 3], [3], [3, 4], [4],
        ]

    def test_fig2_processing_order_and_trajectories(self, fig2):
        plan, state = solve_mapf_with_state(fig2, 3)
        assert state.processing_order() == [0, 1, 2, 3, 4, 5, 6]
        assert reconstruct_trajectories(fig2, plan) == [
            [(0, 0), (1, 1), (3, 2), (5, 3), (6, 4)],
            [(2, 0), (3, 3)],
            [(4, 0), (5, 4)],
        ]

    def test_fig2_per_agent_costs(self, fig2):
        report = validate_mapf(fig2, solve_mapf(fig2, root=3))
        assert report.feasible
        assert report.per_agent_costs == [4, 3, 4]
        assert report.wait_count == 11 - 6

    def test_fig4_plan_and_crossing_trajectory(self, fig4):
        plan = solve_mapf(fig4, root=0)
        assert plan.to_list() == [
            (4, 1, 0), (1, 0, 1), (2, 0, 2), (0, 3, 2), (0, 3, 3), (3, 5, 3),
        ]
        assert makespan(plan) == 4
        assert sum_of_costs(plan, fig4) == 8
        trajs = reconstruct_trajectories(fig4, plan)
        # the agent crossing the whole tree walks 4-1-0-3-5 without a pause
        assert trajs[1] == [(4, 0), (1, 1), (0, 2), (3, 3), (5, 4)]

    def test_subdivided_family_tracks_gap(self, fig4_subdivided):
        # each subdivision of the central edge adds 1 to makespan, 2 to SOC
        for s in range(4):
            inst = fig4_subdivided(s)
            plan = solve_mapf(inst, root=0)
            assert makespan(plan) == 4 + s
            assert sum_of_costs(plan, inst) == 8 + 2 * s
            assert validate_mapf(inst, plan).feasible

    def test_empty_and_settled_instances(self):
        inst = Instance(path_tree(4), [1, 2], [1, 2])
        plan = solve_mapf(inst)
        assert len(plan) == 0
        assert makespan(plan) == 0
        assert sum_of_costs(plan, inst) == 0

    def test_root_choice_changes_plan_not_feasibility(self, fig2):
        for root in range(7):
            plan = solve_mapf(fig2, root=root)
            assert len(plan) == 6
            assert validate_mapf(fig2, plan).feasible

    def test_unbalanced_instance_rejected(self):
        bad = object.__new__(Instance)
        bad.tree = path_tree(3)
        bad.pebbles = np.array([0])
        bad.targets = np.array([], np.int64)
        with pytest.raises(InfeasibleInstanceError):
            solve_mapf(bad)


class TestSchedulerState:
    def test_send_agent_records_departure_and_arrival(self):
        inst = Instance(path_tree(4), [2, 3], [0, 1])
        state = new_scheduler(inst, 0)
        assert state.table.d.tolist() == [0, -1, -2, -1]
        move = send_agent(state, 2, 5)
        assert move == TimedMove(2, 1, 5)
        assert state.l_values(1) == [6]
        assert state.l_values(2) == []

    def test_send_agent_stays_on_target(self):
        inst = Instance(path_tree(2), [0], [0])
        state = new_scheduler(inst, 0)
        assert send_agent(state, 0, 0) is None
        assert state.move_count == 0

    def test_process_leaf_subtree(self):
        inst = Instance(path_tree(4), [2, 3], [0, 1])
        state = new_scheduler(inst, 0)
        process_node(state, 2)
        # the two surplus agents convoy up: 3->2 and 2->1 fire together
        assert state.plan().to_list() == [(3, 2, 0), (2, 1, 0), (2, 1, 1)]
        assert state.l_values(1) == [1, 2]
        assert state.processing_order() == [3, 2]

    def test_process_node_needs_nonpositive_demand(self, fig2):
        state = new_scheduler(fig2, 3)
        with pytest.raises(AssertionError, match="d\\(u\\) <= 0"):
            process_node(state, 5)

    def test_full_solve_consumes_certificate(self, fig2):
        plan, state = solve_mapf_with_state(fig2, 3)
        assert state.move_count == len(plan) == 6
        assert plan == solve_mapf(fig2, root=3)


class TestScheduleProperties:
    @pytest.fixture
    def trials(self):
        rng = np.random.default_rng(41)
        out = []
        for _ in range(40):
            n = int(rng.integers(2, 60))
            inst = random_instance(n, int(rng.integers(0, n + 1)), int(rng.integers(1 << 30)))
            root = int(rng.integers(n))
            out.append((inst, root) + solve_mapf_with_state(inst, root))
        return out

    def test_move_count_equals_certificate(self, trials):
        for inst, root, plan, state in trials:
            table = compute_demands(root_tree(inst.tree, 0), inst)
            assert len(plan) == lower_bound(table)

    def test_plans_validate_with_matching_metrics(self, trials):
        for inst, root, plan, state in trials:
            report = validate_mapf(inst, plan)
            assert report.feasible
            assert report.makespan == makespan(plan)
            assert report.sum_of_costs == sum_of_costs(plan, inst)

    def test_worst_case_bounds(self, trials):
        for inst, root, plan, state in trials:
            n, k = inst.n, inst.k
            if k > 0:
                assert makespan(plan) <= n - k
            assert sum_of_costs(plan, inst) <= k * (n - k)

    def test_each_edge_used_in_one_direction(self, trials):
        for inst, root, plan, state in trials:
            used = {(u, v) for u, v, _ in plan.to_list()}
            assert all((v, u) not in used for u, v in used)

    def test_departure_lists_strictly_increase(self, trials):
        for inst, root, plan, state in trials:
            for u in range(inst.n):
                times = state.l_values(u)
                assert all(a < b for a, b in zip(times, times[1:]))

    def test_processing_order_bounds_queue_times(self, trials):
        # the p-th processed node has seen at most p-1 earlier nodes, of
        # which the targets keep their agents: max l(v_p) <= p - 1 - t_p
        for inst, root, plan, state in trials:
            is_target = np.zeros(inst.n, bool)
            is_target[inst.targets] = True
            targets_seen = 0
            for p, u in enumerate(state.processing_order(), start=1):
                times = state.l_values(u)
                if times:
                    assert max(times) <= p - 1 - targets_seen
                if is_target[u]:
                    targets_seen += 1

    def test_trajectories_partition_moves(self, trials):
        for inst, root, plan, state in trials:
            trajs = reconstruct_trajectories(inst, plan)
            assert len(trajs) == inst.k
            assert sum(len(t) - 1 for t in trajs) == len(plan)
            assert sorted(t[-1][0] for t in trajs) == inst.targets.tolist()
            for t in trajs:
                times = [tm for _, tm in t]
                assert all(a < b for a, b in zip(times, times[1:]))

    def test_path_worst_case_is_tight(self):
        for n, k in [(7, 3), (8, 3), (20, 5)]:
            inst = Instance(path_tree(n), list(range(k)), list(range(n - k, n)))
            plan = solve_mapf(inst)
            assert makespan(plan) == n - k
            assert sum_of_costs(plan, inst) == k * (n - k)


class TestTimedPlanFormat:
    def test_format_and_parse_roundtrip(self, fig2):
        plan = solve_mapf(fig2, root=3)
        text = format_timed_plan(plan, fig2)
        assert text.startswith("# moves=6 makespan=4 soc=11\n")
        assert parse_timed_plan(text) == TimedPlan(plan.moves.astype(np.int64))

    def test_empty_plan(self):
        inst = Instance(path_tree(2), [0], [0])
        plan = solve_mapf(inst)
        assert format_timed_plan(plan, inst) == "# moves=0 makespan=0 soc=0\n"
        assert len(parse_timed_plan("# moves=0 makespan=0 soc=0\n")) == 0

    def test_parse_rejects_malformed(self):
        with pytest.raises(InstanceFormatError, match="'u v t'"):
            parse_timed_plan("1 2\n")
        with pytest.raises(InstanceFormatError, match="non-integer"):
            parse_timed_plan("1 2 x\n")

    def test_timed_plan_dunders(self, fig2):
        plan = solve_mapf(fig2, root=3)
        assert len(plan) == plan.move_count == 6
        assert plan.makespan == 4
        assert list(plan)[0] == TimedMove(0, 1, 0)
        assert plan == solve_mapf(fig2, root=3)
        assert plan != TimedPlan(np.empty((0, 3), np.int64))
        assert plan != "plan"
        assert "TimedPlan" in repr(plan)
