#!/usr/bin/env python3
"""Regenerate the bundled example graphs in canonical JSON form.

These are hand-designed stand-ins for the hand-built experiment graphs:
`toy` is the smallest learnable scenario (one flag behind one defense),
`four_ways` fans out into four defensible flag arms with one AND gate, and
`two_keys_one_door` gates its deepest flag behind an AND of two key arms.
Each defense also covers the step just before its flag so alert-driven
defenders can act before the flag falls.
"""

import pathlib
import sys

sys.path.insert(0, str(pathlib.Path(__file__).resolve().parents[1] / "src"))

from attacksim.graph import (
    AttackGraph,
    AttackStep,
    DefenseStep,
    save_graph,
    validate,
)

OUT = pathlib.Path(__file__).resolve().parents[1] / "src" / "attacksim" / "graphs"


def toy() -> AttackGraph:
    return AttackGraph(
        attack_steps=(
            AttackStep(id="entry", logic="or", ttc_mean=0.0, is_entry=True),
            AttackStep(id="vault", logic="or", ttc_mean=8.0, is_flag=True),
        ),
        defense_steps=(DefenseStep(id="lockdown"),),
        edges=frozenset(
            {
                ("entry", "vault"),
                ("lockdown", "vault"),
            }
        ),
    )


def four_ways() -> AttackGraph:
    # shallow arms keep episodes near the dozen-step mark and let an
    # alert-driven defender stay competitive with blanket blocking
    arms = {
        "north": (1.0, 1.0, 1.0),
        "east": (1.0, 2.0, 1.0),
        "south": (1.0, 2.0, 2.0),
        "west": (2.0, 1.0, 1.0),
    }
    steps = [AttackStep(id="entry", logic="or", ttc_mean=0.0, is_entry=True)]
    defenses = []
    edges = set()
    for arm, (t_recon, t_breach, t_flag) in arms.items():
        recon, breach, flag = f"recon_{arm}", f"breach_{arm}", f"flag_{arm}"
        # the south breach needs recon on two fronts
        logic = "and" if arm == "south" else "or"
        steps.append(AttackStep(id=recon, logic="or", ttc_mean=t_recon))
        steps.append(AttackStep(id=breach, logic=logic, ttc_mean=t_breach))
        steps.append(AttackStep(id=flag, logic="or", ttc_mean=t_flag, is_flag=True))
        defenses.append(DefenseStep(id=f"block_{arm}"))
        edges.update(
            {
                ("entry", recon),
                (recon, breach),
                (breach, flag),
                (f"block_{arm}", breach),
                (f"block_{arm}", flag),
            }
        )
    edges.add(("recon_east", "breach_south"))
    return AttackGraph(
        attack_steps=tuple(steps), defense_steps=tuple(defenses), edges=frozenset(edges)
    )


def two_keys_one_door() -> AttackGraph:
    steps = (
        AttackStep(id="entry", logic="or", ttc_mean=0.0, is_entry=True),
        AttackStep(id="search_east", logic="or", ttc_mean=2.0),
        AttackStep(id="key_east", logic="or", ttc_mean=1.0, is_flag=True),
        AttackStep(id="search_west", logic="or", ttc_mean=3.0),
        AttackStep(id="key_west", logic="or", ttc_mean=1.0, is_flag=True),
        AttackStep(id="open_door", logic="and", ttc_mean=2.0),
        AttackStep(id="treasure", logic="or", ttc_mean=2.0, is_flag=True),
    )
    defenses = (
        DefenseStep(id="safe_east"),
        DefenseStep(id="safe_west"),
        DefenseStep(id="door_lock"),
    )
    edges = frozenset(
        {
            ("entry", "search_east"),
            ("entry", "search_west"),
            ("search_east", "key_east"),
            ("search_west", "key_west"),
            ("key_east", "open_door"),
            ("key_west", "open_door"),
            ("open_door", "treasure"),
            ("safe_east", "search_east"),
            ("safe_east", "key_east"),
            ("safe_west", "search_west"),
            ("safe_west", "key_west"),
            ("door_lock", "open_door"),
            ("door_lock", "treasure"),
        }
    )
    return AttackGraph(attack_steps=steps, defense_steps=defenses, edges=edges)


def main():
    OUT.mkdir(parents=True, exist_ok=True)
    for name, builder in (
        ("toy", toy),
        ("four_ways", four_ways),
        ("two_keys_one_door", two_keys_one_door),
    ):
        graph = builder()
        violations = validate(graph)
        if violations:
            raise SystemExit(f"{name}: invalid graph: {violations}")
        path = OUT / f"{name}.json"
        path.write_text(save_graph(graph), encoding="utf-8")
        print(f"wrote {path} (|A|={graph.num_attack_steps}, |D|={graph.num_defense_steps}, "
              f"flags={len(graph.flag_ids)})")


if __name__ == "__main__":
    main()
