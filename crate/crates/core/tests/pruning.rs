//! Pruned start sets against brute-force row enumeration, and sampled
//! panels against the pruned space.

use std::collections::BTreeSet;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use raven_core::grammar::{slots, Attribute, FigureConfiguration, Value, COLOR_VALUES, SIZE_VALUES, TYPE_NAMES};
use raven_core::rules::{
    apply_rule, check_row, latin_squares, rule_classes, Distribution, Rule, RuleClass, RuleGroup, RuleSlot, RuleSpec,
};
use raven_core::sampler::{generate_matrix_with, sample_rule_groups};
use raven_core::space::{prune_space, sample_panel};
use raven_core::RuleMode;

fn constant(target: Attribute) -> RuleSpec {
    RuleSpec {
        target,
        rule: Rule::Constant,
    }
}

/// Groups for every component, with `rule` placed in its slot of component
/// `ci` and Constant elsewhere.
fn groups_with(config: FigureConfiguration, ci: usize, rule: RuleSpec) -> Vec<RuleGroup> {
    (0..config.components().len())
        .map(|c| {
            let mut slots = [
                constant(Attribute::Number),
                constant(Attribute::Type),
                constant(Attribute::Size),
                constant(Attribute::Color),
            ];
            if c == ci {
                let slot = RuleSlot::ALL
                    .into_iter()
                    .find(|s| s.attributes().contains(&rule.target))
                    .unwrap();
                slots[slot.index()] = rule;
            }
            RuleGroup { component: c, slots }
        })
        .collect()
}

/// Candidate rules for one attribute: every plain class plus a few
/// DistributeThree triples.
fn candidate_rules(attribute: Attribute, domain: &[Value]) -> Vec<RuleSpec> {
    let mut out = Vec::new();
    for class in rule_classes(attribute) {
        let rule = match class {
            RuleClass::Constant => Rule::Constant,
            RuleClass::Progression(d) => Rule::Progression(d),
            RuleClass::Arithmetic(op) => Rule::Arithmetic(op),
            RuleClass::DistributeThree => {
                let n = domain.len();
                if n >= 3 {
                    for triple in [[0, 1, 2], [n - 3, n - 2, n - 1], [0, n / 2, n - 1]] {
                        out.push(RuleSpec {
                            target: attribute,
                            rule: Rule::DistributeThree(Distribution {
                                values: triple.map(|i| domain[i]),
                                rows: latin_squares()[3],
                            }),
                        });
                    }
                }
                continue;
            }
        };
        out.push(RuleSpec {
            target: attribute,
            rule,
        });
    }
    out
}

/// Starts from which some full, non-degenerate row passes check_row.
fn brute_force_starts(
    rule: &RuleSpec,
    domain: &[Value],
    dom: &raven_core::grammar::AttributeDomain,
) -> BTreeSet<Value> {
    let mut out = BTreeSet::new();
    for &a in domain {
        let found = match rule.rule {
            Rule::Constant => true,
            Rule::DistributeThree(dist) => dist.values.contains(&a),
            Rule::Progression(_) => domain
                .iter()
                .any(|&b| b != a && domain.iter().any(|&c| check_row(rule, dom, &[a, b, c]))),
            Rule::Arithmetic(_) => domain
                .iter()
                .any(|&b| domain.iter().any(|&c| c != a && check_row(rule, dom, &[a, b, c]))),
        };
        if found {
            out.insert(a);
        }
    }
    out
}

#[test]
fn pruning_is_sound_and_complete() {
    for config in FigureConfiguration::ALL {
        for (ci, spec) in config.components().iter().enumerate() {
            for attribute in Attribute::RULE_TARGETS {
                let dom = spec.domain(attribute);
                // Cubic enumeration is kept to domains of moderate size.
                if dom.len() > 64 {
                    continue;
                }
                for rule in candidate_rules(attribute, &dom.values) {
                    let expected = brute_force_starts(&rule, &dom.values, dom);
                    let groups = groups_with(config, ci, rule);
                    match prune_space(config, &groups) {
                        Ok(space) => {
                            let starts: BTreeSet<Value> =
                                space.starts(ci, attribute).unwrap().iter().copied().collect();
                            assert_eq!(starts, expected, "{config} c{ci} {rule}");
                            for &a in &starts {
                                let slot = RuleSlot::ALL
                                    .into_iter()
                                    .find(|s| s.attributes().contains(&attribute))
                                    .unwrap();
                                let second = match rule.rule {
                                    Rule::Arithmetic(_) => space.seconds(ci, slot, a)[0],
                                    Rule::DistributeThree(_) => continue,
                                    _ => apply_rule(&rule, dom, &[a], 0).unwrap(),
                                };
                                let third = apply_rule(&rule, dom, &[a, second], 0)
                                    .unwrap_or_else(|e| panic!("{config} {rule} from {a:?}: {e}"));
                                assert!(check_row(&rule, dom, &[a, second, third]));
                            }
                        }
                        Err(_) => assert!(expected.is_empty(), "{config} c{ci} {rule} rejected but {expected:?}"),
                    }
                }
            }
        }
    }
}

#[test]
fn large_position_domain_is_sound() {
    let config = FigureConfiguration::Grid3x3;
    let dom = config.components()[0].domain(Attribute::Position);
    for rule in candidate_rules(Attribute::Position, &dom.values) {
        let space = prune_space(config, &groups_with(config, 0, rule)).unwrap();
        for &a in space.starts(0, Attribute::Position).unwrap() {
            let second = match rule.rule {
                Rule::Arithmetic(_) => {
                    let seconds = space.seconds(0, RuleSlot::Layout, a);
                    assert!(!seconds.is_empty());
                    seconds[seconds.len() / 2]
                }
                Rule::DistributeThree(_) => continue,
                _ => apply_rule(&rule, dom, &[a], 0).unwrap(),
            };
            let third = apply_rule(&rule, dom, &[a, second], 0).unwrap();
            assert!(check_row(&rule, dom, &[a, second, third]));
        }
    }
}

#[test]
fn minus_on_grid_number() {
    let config = FigureConfiguration::Grid2x2;
    let rule = RuleSpec {
        target: Attribute::Number,
        rule: Rule::Arithmetic(raven_core::rules::ArithmeticOp::Minus),
    };
    let space = prune_space(config, &groups_with(config, 0, rule)).unwrap();
    // n3 = n1 - n2 >= 1 with every count in 1..=4.
    let brute: Vec<u16> = (1..=4u16).filter(|n1| (1..=4).any(|n2| n1 > &n2)).collect();
    let starts: Vec<u16> = space
        .starts(0, Attribute::Number)
        .unwrap()
        .iter()
        .map(|v| v.0)
        .collect();
    assert_eq!(starts, brute);
    assert_eq!(starts, [2, 3, 4]);
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    for _ in 0..1000 {
        let panel = sample_panel(&space, &mut rng);
        let n = panel.components[0].number();
        assert!((2..=4).contains(&n));
        assert_eq!(slots::count(panel.components[0].position()), n);
    }
}

#[test]
fn ten_thousand_random_panels_stay_in_domain() {
    for i in 0..10_000u64 {
        let config = FigureConfiguration::ALL[(i % 7) as usize];
        let mut rng = ChaCha8Rng::seed_from_u64(i);
        let groups = sample_rule_groups(config, &mut rng).unwrap();
        assert!(groups.iter().flat_map(|g| &g.slots).all(|s| !s.target.is_noise()));
        let space = prune_space(config, &groups).unwrap();
        let panel = sample_panel(&space, &mut rng);
        panel.validate().unwrap();
        for (ci, (spec, comp)) in config.components().iter().zip(&panel.components).enumerate() {
            assert!(comp.number() >= 1 && comp.number() <= spec.slots.len());
            assert_eq!(slots::to_slots(comp.position()).len(), comp.number());
            for e in &comp.entities {
                assert!((e.type_idx as usize) < TYPE_NAMES.len());
                assert!((e.size_idx as usize) < SIZE_VALUES.len());
                assert!((e.color_idx as usize) < COLOR_VALUES.len());
                assert!((e.angle_idx as usize) < 8);
                for attribute in [
                    Attribute::Type,
                    Attribute::Size,
                    Attribute::Color,
                    Attribute::Orientation,
                ] {
                    assert!(spec
                        .domain(attribute)
                        .contains(Value(e.level(attribute).unwrap() as u16)));
                }
            }
            if comp.uniformity {
                let first = &comp.entities[0];
                assert!(comp.entities.iter().all(
                    |e| (e.type_idx, e.size_idx, e.color_idx) == (first.type_idx, first.size_idx, first.color_idx)
                ));
            }
            for slot in &space.components[ci].slots {
                if let Some(v) = comp.value(slot.rule.target) {
                    assert!(slot.starts.contains(&v), "{config} {} {v:?}", slot.rule);
                }
            }
        }
    }
}

#[test]
fn rows_hold_on_a_thousand_matrices_per_configuration() {
    for config in FigureConfiguration::ALL {
        for seed in 0..1000 {
            let draft = generate_matrix_with(config, seed, RuleMode::Full).unwrap();
            assert_eq!(draft.panels.len(), 9);
            for group in &draft.rule_groups {
                let spec = &config.components()[group.component];
                let released = draft.panels.iter().all(|p| !p.components[group.component].uniformity);
                for rule in &group.slots {
                    if released && rule.target.is_entity_level() {
                        continue;
                    }
                    let dom = spec.domain(rule.target);
                    for r in 0..3 {
                        let row: Vec<Value> = (0..3)
                            .map(|c| {
                                draft.panels[3 * r + c].components[group.component]
                                    .value(rule.target)
                                    .unwrap()
                            })
                            .collect();
                        assert!(
                            check_row(rule, dom, &[row[0], row[1], row[2]]),
                            "{config} seed {seed} {rule} row {r}"
                        );
                    }
                }
            }
        }
    }
}

#[test]
fn constant_matrices_repeat_up_to_noise() {
    let mut seen = 0;
    for config in FigureConfiguration::ALL {
        for seed in 0..4000 {
            let draft = generate_matrix_with(config, seed, RuleMode::Full).unwrap();
            let all_constant = draft
                .rule_groups
                .iter()
                .flat_map(|g| &g.slots)
                .all(|s| s.rule == Rule::Constant);
            // With Number governed, Position is free to move between panels.
            let pinned = draft
                .rule_groups
                .iter()
                .all(|g| g.slots[0].target == Attribute::Position || config.components()[g.component].slots.len() == 1);
            let uniform = draft.panels.iter().all(|p| p.components.iter().all(|c| c.uniformity));
            if !(all_constant && pinned && uniform) {
                continue;
            }
            seen += 1;
            let strip = |p: &raven_core::PanelState| {
                let mut p = p.clone();
                p.components
                    .iter_mut()
                    .flat_map(|c| &mut c.entities)
                    .for_each(|e| e.angle_idx = 0);
                p
            };
            let first = strip(&draft.panels[0]);
            assert!(draft.panels.iter().all(|p| strip(p) == first), "{config} seed {seed}");
        }
    }
    assert!(seen >= 10, "only {seen} all-Constant matrices found");
}
