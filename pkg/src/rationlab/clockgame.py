"""Extensive form of the clock-style rationing mechanism.

Both agents start at half the supply. In the opening move each picks
stay / one-down / one-up; unless the picks are exactly complementary
(one down, one up) the game ends at equal division. Afterwards the
allotments drift one unit per step in the chosen directions, and each
step both agents simultaneously choose to continue or to stop the
clock; any stop (or an allotment hitting zero) freezes the current
temporary allotments as final.

The simplicity checker grades the prescribed action at each decision
node by how many future own actions must be committed before the plan's
worst case beats the best case of any deviation: a plan committing k
actions after the anchor is simply dominant when that holds with the
agent acting adversarially toward themselves beyond the horizon.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import product
from typing import Callable, Iterable

from .model import ConfigurationError, PayoffParams, Valuation, utility

CONTINUE = "continue"
OPT_OUT = "opt_out"

_PARAMS = PayoffParams()


@dataclass(frozen=True)
class GameNode:
    temp: tuple[int, int]
    delta: tuple[int, int]
    step: int
    movers: frozenset[int]
    terminal_allocation: tuple[int, int] | None = None

    @property
    def is_terminal(self) -> bool:
        return self.terminal_allocation is not None


@dataclass(frozen=True)
class StrategicPlan:
    """An anchor action plus up to `horizon` committed future own actions.

    horizon None commits the prescribed action at every future own node
    (an unbounded plan); beyond a finite horizon the agent's own future
    play is treated adversarially.
    """

    anchor_action: object
    horizon: int | None = 0
    committed_actions: tuple = ()


class ClockGame:
    """Game tree for one supply level; valuations only matter for payoffs."""

    def __init__(self, supply: int = 20, opt_out: bool = True):
        if supply % 2 != 0:
            raise ConfigurationError("supply must be even for equal initial split")
        self.supply = supply
        self.opt_out = opt_out
        half = supply // 2
        self.root = GameNode(temp=(half, half), delta=(0, 0), step=0,
                             movers=frozenset({0, 1}))
        self._children: dict[GameNode, dict[tuple, GameNode]] = {}
        self._build()

    def _build(self):
        frontier = [self.root]
        while frontier:
            node = frontier.pop()
            children = {}
            for joint in product(self.actions(node, 0), self.actions(node, 1)):
                child = self._transition(node, joint)
                children[joint] = child
                if not child.is_terminal and child not in self._children:
                    frontier.append(child)
            self._children[node] = children

    def actions(self, node: GameNode, agent: int) -> tuple:
        if node.is_terminal:
            return ()
        if node.step == 0:
            x = node.temp[agent]
            return (x - 1, x, x + 1)
        return (CONTINUE, OPT_OUT) if self.opt_out else (CONTINUE,)

    def _transition(self, node: GameNode, joint: tuple) -> GameNode:
        s = self.supply
        if node.step == 0:
            c1, c2 = joint
            half = s // 2
            if c1 == half or c2 == half or c1 + c2 != s:
                return GameNode(node.temp, (0, 0), 1, frozenset(),
                                terminal_allocation=node.temp)
            temp = (c1, c2)
            delta = (c1 - half, c2 - half)
            if min(temp) == 0:
                return GameNode(temp, delta, 1, frozenset(), terminal_allocation=temp)
            return GameNode(temp, delta, 1, frozenset({0, 1}))
        if OPT_OUT in joint:
            return GameNode(node.temp, node.delta, node.step + 1, frozenset(),
                            terminal_allocation=node.temp)
        temp = (node.temp[0] + node.delta[0], node.temp[1] + node.delta[1])
        if min(temp) == 0:
            return GameNode(temp, node.delta, node.step + 1, frozenset(),
                            terminal_allocation=temp)
        return GameNode(temp, node.delta, node.step + 1, frozenset({0, 1}))

    def result(self, node: GameNode, joint: tuple) -> GameNode:
        return self._children[node][joint]

    @property
    def live_nodes(self) -> list[GameNode]:
        return sorted(self._children, key=lambda n: (n.step, n.temp))


def build_tree(valuation: Valuation, opt_out: bool = True) -> ClockGame:
    if valuation.n != 2:
        raise ConfigurationError("clock game is built for two agents")
    return ClockGame(supply=valuation.supply, opt_out=opt_out)


def _payoff(node: GameNode, agent: int, peak: int, supply: int):
    return utility(peak, node.terminal_allocation[agent], _PARAMS, supply)


def _extreme_value(game: ClockGame, node: GameNode, agent: int, peak: int,
                   pick: Callable) -> float:
    """Best/worst terminal payoff with every choice (own included) free."""
    if node.is_terminal:
        return _payoff(node, agent, peak, game.supply)
    return pick(_extreme_value(game, c, agent, peak, pick)
                for c in game._children[node].values())


def _guaranteed(game: ClockGame, node: GameNode, agent: int, peak: int,
                budget: int | None):
    """Payoff securable with `budget` more committed own actions.

    Within the budget the agent picks own actions to maximize the worst
    case; once it runs out their own play turns adversarial too. The
    opponent is adversarial throughout. budget None never runs out.
    """
    if node.is_terminal:
        return _payoff(node, agent, peak, game.supply)
    own = game.actions(node, agent)
    opp = game.actions(node, 1 - agent)
    nxt = None if budget is None else budget - 1

    def after(a):
        return min(
            _guaranteed(game, _child(game, node, agent, a, p), agent, peak, nxt)
            for p in opp)

    if budget is None or budget > 0:
        return max(after(a) for a in own)
    return min(after(a) for a in own)


def _child(game: ClockGame, node: GameNode, agent: int, own_action, opp_action):
    joint = (own_action, opp_action) if agent == 0 else (opp_action, own_action)
    return game.result(node, joint)


def best_deviation_value(game: ClockGame, node: GameNode, agent: int, peak: int,
                         anchor) -> float:
    """Best terminal payoff reachable after any action other than the anchor."""
    alts = [a for a in game.actions(node, agent) if a != anchor]
    values = [
        _extreme_value(game, _child(game, node, agent, a, p), agent, peak, max)
        for a in alts for p in game.actions(node, 1 - agent)
    ]
    return max(values) if values else float("-inf")


def plan_outcome_bounds(game: ClockGame, node: GameNode, agent: int, peak: int,
                        plan: StrategicPlan):
    """Worst payoff of following a plan vs. best payoff of deviating now."""
    if agent not in node.movers:
        raise ConfigurationError("agent is not a mover at this node")

    def follow(n: GameNode, committed: tuple):
        if n.is_terminal:
            return _payoff(n, agent, peak, game.supply)
        if plan.horizon is None:
            mine = (ds_action(game, n, agent, peak),)
            rest = ()
        elif committed:
            mine, rest = (committed[0],), committed[1:]
        else:
            mine, rest = game.actions(n, agent), ()
            # out of committed actions: own play adversarial from here on
            return min(
                min(follow_fixed(_child(game, n, agent, a, p))
                    for p in game.actions(n, 1 - agent))
                for a in mine)
        return min(follow(_child(game, n, agent, mine[0], p), rest)
                   for p in game.actions(n, 1 - agent))

    def follow_fixed(n: GameNode):
        return _extreme_value(game, n, agent, peak, min)

    worst = min(
        follow(_child(game, node, agent, plan.anchor_action, p),
               tuple(plan.committed_actions))
        for p in game.actions(node, 1 - agent))
    best_dev = best_deviation_value(game, node, agent, peak, plan.anchor_action)
    return worst, best_dev


def simply_dominant(game: ClockGame, node: GameNode, agent: int, peak: int,
                    anchor, k: int | None) -> bool:
    """Is some plan with this anchor and k committed follow-ups dominant?

    Searching over committed continuations is folded into the guaranteed
    value: within the budget the agent commits whatever maximizes the
    worst case, which is exactly the best plan of that length.
    """
    worst = min(
        _guaranteed(game, _child(game, node, agent, anchor, p), agent, peak, k)
        for p in game.actions(node, 1 - agent))
    return worst >= best_deviation_value(game, node, agent, peak, anchor)


def ds_action(game: ClockGame, node: GameNode, agent: int, peak: int):
    """Move one unit toward the peak while strictly before it; else stop."""
    x = node.temp[agent]
    if node.step == 0:
        if peak > x:
            return x + 1
        if peak < x:
            return x - 1
        return x
    d = node.delta[agent]
    return CONTINUE if d * (peak - x) > 0 else OPT_OUT


CATEGORIES = (
    "initial-1step-only",
    "initial-0step",
    "wrong-direction",
    "before-peak-1step-only",
    "before-peak-0step",
    "at-peak",
    "past-peak",
)


@dataclass(frozen=True)
class NodeClassification:
    category: str
    ds_action: str


def classify_node(game: ClockGame, node: GameNode, agent: int,
                  peak: int) -> NodeClassification:
    """Table-row label for a decision node, with simplicity grade computed
    by the checker rather than from position alone."""
    if agent not in node.movers:
        raise ConfigurationError("agent is not a mover at this node")
    anchor = ds_action(game, node, agent, peak)
    x = node.temp[agent]
    half = game.supply // 2
    if node.step == 0:
        zero_step = simply_dominant(game, node, agent, peak, anchor, 0)
        category = "initial-0step" if zero_step else "initial-1step-only"
        label = "move-toward-peak" if peak != x else "opt-out"
        return NodeClassification(category, label)
    d = node.delta[agent]
    if x == peak:
        return NodeClassification("at-peak", "opt-out")
    if d * (peak - x) > 0:
        zero_step = simply_dominant(game, node, agent, peak, anchor, 0)
        category = "before-peak-0step" if zero_step else "before-peak-1step-only"
        return NodeClassification(category, "continue")
    if d * (peak - half) < 0:
        return NodeClassification("wrong-direction", "opt-out")
    return NodeClassification("past-peak", "opt-out")


def verify_osp(valuation: Valuation, horizon: int | None = None,
               game: ClockGame | None = None) -> bool:
    """Every prescribed action admits a simply dominant plan at `horizon`."""
    game = game or build_tree(valuation)
    for node in game.live_nodes:
        for agent in node.movers:
            peak = valuation.peaks[agent]
            anchor = ds_action(game, node, agent, peak)
            if not simply_dominant(game, node, agent, peak, anchor, horizon):
                return False
    return True


def ds_path(game: ClockGame, peaks: tuple[int, int]) -> list[GameNode]:
    """Nodes visited (terminal last) when both agents follow the clock's
    prescribed strategy."""
    path = [game.root]
    while not path[-1].is_terminal:
        node = path[-1]
        joint = (ds_action(game, node, 0, peaks[0]),
                 ds_action(game, node, 1, peaks[1]))
        path.append(game.result(node, joint))
    return path


def ds_terminal_allocation(valuation: Valuation) -> tuple[int, int]:
    game = build_tree(valuation)
    return ds_path(game, valuation.peaks)[-1].terminal_allocation


def schedule_walk(schedule: Iterable[tuple[int, int]], subjects: int) -> dict:
    """Predicted per-category node-visit counts for a session design.

    Each period, subjects/2 pairs play the prescribed strategies through
    that period's tree; every live node on the path counts one
    observation per agent seated there.
    """
    if subjects % 2 != 0:
        raise ConfigurationError("subjects must pair up evenly")
    pairs = subjects // 2
    counts = {c: 0 for c in CATEGORIES}
    for type_a, type_b in schedule:
        val = Valuation((type_a, type_b))
        game = build_tree(val)
        for node in ds_path(game, val.peaks):
            if node.is_terminal:
                continue
            for agent in node.movers:
                cls = classify_node(game, node, agent, val.peaks[agent])
                counts[cls.category] += pairs
    counts["total"] = sum(counts[c] for c in CATEGORIES)
    counts["initial"] = counts["initial-1step-only"] + counts["initial-0step"]
    return counts


def export_tree(game: ClockGame, valuation: Valuation | None = None) -> str:
    """Line-oriented dump: one node per line, children by joint action."""
    ids: dict[GameNode, int] = {}

    def nid(node: GameNode) -> int:
        if node not in ids:
            ids[node] = len(ids)
        return ids[node]

    lines = []
    live = game.live_nodes
    for node in live:
        nid(node)
    for node in live:
        fields = [
            f"node={nid(node)}",
            f"step={node.step}",
            f"temp={node.temp[0]},{node.temp[1]}",
            f"delta={node.delta[0]},{node.delta[1]}",
            f"movers={','.join(str(a) for a in sorted(node.movers))}",
        ]
        if valuation is not None:
            labels = [classify_node(game, node, agent, valuation.peaks[agent]).category
                      for agent in sorted(node.movers)]
            fields.append(f"class={'|'.join(labels)}")
        kids = []
        for joint, child in game._children[node].items():
            tag = "+".join(str(a) for a in joint)
            if child.is_terminal:
                alloc = child.terminal_allocation
                kids.append(f"{tag}->end({alloc[0]},{alloc[1]})")
            else:
                kids.append(f"{tag}->{nid(child)}")
        fields.append("children=" + ";".join(kids))
        lines.append(" ".join(fields))
    return "\n".join(lines) + "\n"
