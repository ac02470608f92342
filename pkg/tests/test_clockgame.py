"""Clock-game tree construction, simplicity grading, and the schedule walk."""

import pytest

from rationlab.model import (
    ConfigurationError,
    PERIOD_TYPES,
    VALUATIONS,
    Valuation,
    uniform_allocate,
)
from rationlab.clockgame import (
    CONTINUE,
    OPT_OUT,
    ClockGame,
    StrategicPlan,
    build_tree,
    classify_node,
    ds_action,
    ds_path,
    ds_terminal_allocation,
    export_tree,
    plan_outcome_bounds,
    schedule_walk,
    simply_dominant,
    verify_osp,
)


@pytest.fixture(scope="module")
def game():
    return ClockGame()


def node_at(game, temp):
    for node in game.live_nodes:
        if node.temp == temp and node.step > 0:
            return node
    raise AssertionError(f"no live node at {temp}")


def test_tree_shape(game):
    # root + 9 step nodes on each of the two directions
    assert len(game.live_nodes) == 19
    root = game.root
    assert root.temp == (10, 10) and root.step == 0
    # choosing the initial assignment, or non-complementary picks, ends at 10/10
    for joint in [(10, 9), (9, 9), (11, 11), (10, 10), (9, 10)]:
        child = game.result(root, joint)
        assert child.is_terminal and child.terminal_allocation == (10, 10)
    live = game.result(root, (9, 11))
    assert not live.is_terminal
    assert live.temp == (9, 11) and live.delta == (-1, 1) and live.step == 1


def test_boundary_termination(game):
    node = node_at(game, (1, 19))
    child = game.result(node, (CONTINUE, CONTINUE))
    assert child.is_terminal and child.terminal_allocation == (0, 20)


def test_opt_out_freezes_current_temps(game):
    node = node_at(game, (9, 11))
    for joint in [(OPT_OUT, CONTINUE), (CONTINUE, OPT_OUT), (OPT_OUT, OPT_OUT)]:
        child = game.result(node, joint)
        assert child.is_terminal and child.terminal_allocation == (9, 11)


def test_temps_sum_to_supply_everywhere(game):
    for node in game.live_nodes:
        assert sum(node.temp) == 20
        for child in game._children[node].values():
            if child.is_terminal:
                assert sum(child.terminal_allocation) == 20


def test_odd_supply_rejected():
    with pytest.raises(ConfigurationError):
        ClockGame(supply=19)


def test_plan_bounds_worked_examples(game):
    root = game.root
    # far peak: riding down can never end worse than being stuck at 10
    worst, best_dev = plan_outcome_bounds(game, root, 0, 3, StrategicPlan(9, 0))
    assert (worst, best_dev) == (13, 13)
    # near peak: unplanned continuation may roll past 9 all the way to 0
    worst, best_dev = plan_outcome_bounds(game, root, 0, 9, StrategicPlan(9, 0))
    assert worst == 11  # payoff of ending at 0 with peak 9
    assert best_dev == 19  # choosing 10 guarantees 19
    # committing to stop at the next node restores dominance
    worst, best_dev = plan_outcome_bounds(
        game, root, 0, 9, StrategicPlan(9, 1, (OPT_OUT,)))
    assert (worst, best_dev) == (19, 19)
    # stopping at one's peak guarantees the maximum
    node = node_at(game, (9, 11))
    worst, best_dev = plan_outcome_bounds(game, node, 0, 9, StrategicPlan(OPT_OUT, 0))
    assert worst == 20
    assert best_dev <= 20


def test_initial_node_zero_step_threshold(game):
    # Consequence of the checker, not an input: a toward-peak opening pick
    # is 0-step simply dominant iff the far boundary is no worse than 10.
    for peak in range(21):
        anchor = ds_action(game, game.root, 0, peak)
        flag = simply_dominant(game, game.root, 0, peak, anchor, 0)
        if peak == 10:
            assert flag  # picking 10 ends the game at the peak
        else:
            assert flag == (abs(peak - 10) >= 5), peak


def test_classify_initial_nodes(game):
    assert classify_node(game, game.root, 0, 3).category == "initial-0step"
    assert classify_node(game, game.root, 0, 9).category == "initial-1step-only"
    assert classify_node(game, game.root, 0, 13).category == "initial-1step-only"
    assert classify_node(game, game.root, 0, 16).category == "initial-0step"


def test_classify_step_nodes(game):
    # peak 13 riding up at 11: before peak, graded by the checker
    node = node_at(game, (9, 11))
    cls = classify_node(game, node, 1, 13)
    assert cls.category == "before-peak-1step-only" and cls.ds_action == "continue"
    # distance to peak >= peak-to-boundary distance flips the grade
    node = node_at(game, (11, 9))
    cls = classify_node(game, node, 0, 16)
    assert cls.category == "before-peak-0step"
    node = node_at(game, (13, 7))
    assert classify_node(game, node, 0, 16).category == "before-peak-1step-only"
    # at-peak, past-peak, wrong-direction
    node = node_at(game, (13, 7))
    assert classify_node(game, node, 0, 13).category == "at-peak"
    node = node_at(game, (7, 13))
    assert classify_node(game, node, 0, 9).category == "past-peak"
    node = node_at(game, (9, 11))
    assert classify_node(game, node, 0, 16).category == "wrong-direction"
    for temp, agent, peak in [((7, 13), 0, 9), ((9, 11), 0, 16)]:
        assert classify_node(game, node_at(game, temp), agent, peak).ds_action == "opt-out"


def test_verify_osp_all_valuations():
    for val in VALUATIONS.values():
        assert verify_osp(val, horizon=None)
        assert verify_osp(val, horizon=1)


def test_not_sosp_exactly_at_near_peaks():
    # horizon 0 fails for the schedule because of near-10 peaks
    game = ClockGame()
    assert not simply_dominant(game, game.root, 0, 9,
                               ds_action(game, game.root, 0, 9), 0)
    assert simply_dominant(game, game.root, 0, 3,
                           ds_action(game, game.root, 0, 3), 0)
    assert not verify_osp(VALUATIONS[6], horizon=0)


def test_mutated_rule_without_opt_out_not_osp():
    # removing the stop option breaks dominance when the far boundary is
    # worse than staying at 10
    for vid in (4, 6):
        val = VALUATIONS[vid]
        game = build_tree(val, opt_out=False)
        assert not verify_osp(val, horizon=None, game=game)
    # degenerate game with no decision nodes is vacuously simple
    empty = ClockGame()
    empty._children = {}
    assert verify_osp(VALUATIONS[1], game=empty)


def test_ds_path_reaches_uniform_allocation():
    for val in VALUATIONS.values():
        assert ds_terminal_allocation(val) == uniform_allocate(val.peaks)
    # role-swapped periods too
    for a, b in PERIOD_TYPES:
        assert ds_terminal_allocation(Valuation((a, b))) == uniform_allocate((a, b))


def test_ds_path_lengths_match_node_counts():
    # decision nodes per subject along the prescribed path: 1,1,7,4,6,2
    want = {1: 1, 2: 1, 3: 7, 4: 4, 5: 6, 6: 2}
    for vid, val in VALUATIONS.items():
        game = build_tree(val)
        live = [n for n in ds_path(game, val.peaks) if not n.is_terminal]
        assert len(live) == want[vid]


def test_schedule_walk_predicted_counts():
    counts = schedule_walk(PERIOD_TYPES, subjects=46)
    assert counts["initial-1step-only"] == 138
    assert counts["initial-0step"] == 414
    assert counts["wrong-direction"] == 0
    assert counts["before-peak-1step-only"] == 598
    assert counts["before-peak-0step"] == 506
    assert counts["at-peak"] == 276
    assert counts["past-peak"] == 0
    assert counts["total"] == 1932
    assert counts["initial"] == 552
    assert counts["total"] == counts["initial"] + 598 + 506 + 276
    with pytest.raises(ConfigurationError):
        schedule_walk(PERIOD_TYPES, subjects=45)


def test_export_tree(game):
    dump = export_tree(game, VALUATIONS[4])
    lines = [ln for ln in dump.splitlines() if ln]
    assert len(lines) == 19
    assert lines[0].startswith("node=0 step=0 temp=10,10")
    assert all("children=" in ln for ln in lines)
    assert any("end(0,20)" in ln for ln in lines)
