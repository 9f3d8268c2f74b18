use proptest::prelude::*;

use menter_core::{
    emit, evaluate_spec, flatten, parse_netlist, parse_value, run_erc, Check, Direction, ElementKind,
    ErcConfig, RuleId, SolverOptions, SpecRequirement,
};

const SUFFIXES: [&str; 10] = ["", "f", "p", "n", "u", "m", "k", "meg", "g", "t"];

fn value_token() -> impl Strategy<Value = String> {
    (1u32..1000, 0usize..SUFFIXES.len(), prop::bool::ANY, "[a-z]{0,3}").prop_map(
        |(m, s, frac, unit)| {
            let num = if frac { format!("{}.{}", m / 10, m % 10) } else { m.to_string() };
            // A unit tail must not start with a scale letter or it would be read as one.
            let unit = if unit.is_empty() || SUFFIXES[s].is_empty() { String::new() } else { unit };
            format!("{num}{}{unit}", SUFFIXES[s])
        },
    )
}

fn node() -> impl Strategy<Value = String> {
    prop_oneof![Just("0".to_string()), "[a-z][a-z0-9_]{0,4}"]
}

#[derive(Debug, Clone)]
enum Card {
    Two(char, String, String, String),
    Mos(String, String, String, String, bool, String),
}

fn card() -> impl Strategy<Value = Card> {
    prop_oneof![
        (prop::sample::select(vec!['R', 'C', 'V', 'I']), node(), node(), value_token())
            .prop_map(|(k, a, b, v)| Card::Two(k, a, b, v)),
        (node(), node(), node(), node(), prop::bool::ANY, value_token())
            .prop_map(|(d, g, s, b, p, w)| Card::Mos(d, g, s, b, p, w)),
    ]
}

fn render(cards: &[Card], with_sub: bool, instances: usize) -> String {
    let mut out = String::from(".title generated\n.model nm nmos (level=1 vto=0.5 kp=1e-4)\n.model pm pmos (level=1 vto=-0.5 kp=5e-5 lambda=0.01)\n");
    if with_sub {
        out.push_str(".subckt cell a b\nRa a mid 1k\nCa mid b 1p\nMa mid a b b nm w=2u l=1u\n.ends cell\n");
    }
    for (i, c) in cards.iter().enumerate() {
        match c {
            Card::Two(k, a, b, v) => out.push_str(&format!("{k}{i} {a} {b} {v}\n")),
            Card::Mos(d, g, s, b, p, w) => {
                let m = if *p { "pm" } else { "nm" };
                out.push_str(&format!("M{i} {d} {g} {s} {b} {m} w={w} l=1u\n"))
            }
        }
    }
    if with_sub {
        for i in 0..instances {
            out.push_str(&format!("X{i} n{i} 0 cell\n"));
        }
    }
    out.push_str(".end\n");
    out
}

fn deck() -> impl Strategy<Value = (Vec<Card>, bool, usize)> {
    (prop::collection::vec(card(), 0..12), prop::bool::ANY, 0usize..4)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn emit_parse_round_trip((cards, sub, inst) in deck()) {
        let first = parse_netlist(&render(&cards, sub, inst));
        prop_assume!(!first.has_errors());
        let second = parse_netlist(&emit(&first));
        prop_assert!(!second.has_errors(), "{:?}", second.diagnostics);
        prop_assert_eq!(&second, &first);
        prop_assert_eq!(emit(&second), emit(&first));
    }

    #[test]
    fn value_parsing_ignores_case(tok in value_token()) {
        let lower = parse_value(&tok).unwrap();
        let upper = parse_value(&tok.to_uppercase()).unwrap();
        prop_assert_eq!(lower.magnitude.to_bits(), upper.magnitude.to_bits());
    }

    #[test]
    fn flatten_preserves_device_count((cards, sub, inst) in deck()) {
        let net = parse_netlist(&render(&cards, sub, inst));
        prop_assume!(!net.has_errors());
        let flat = flatten(&net).unwrap();
        let top = net.elements.iter().filter(|e| e.kind != ElementKind::SubcktInstance).count();
        let nested: usize = net
            .elements
            .iter()
            .filter(|e| e.kind == ElementKind::SubcktInstance)
            .map(|e| net.subckts[e.model_ref.as_deref().unwrap()].body.len())
            .sum();
        prop_assert_eq!(flat.device_count(), top + nested);
    }

    #[test]
    fn erc_is_permutation_stable((cards, sub, inst) in deck(), seed in any::<u64>()) {
        let text = render(&cards, sub, inst);
        let net = parse_netlist(&text);
        prop_assume!(!net.has_errors());
        let mut lines: Vec<&str> = text.lines().collect();
        let header_end = lines.iter().position(|l| l.starts_with(".ends")).map_or(3, |p| p + 1);
        let end = lines.len() - 1;
        let mut body = lines[header_end..end].to_vec();
        let mut s = seed;
        for i in (1..body.len()).rev() {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            body.swap(i, (s >> 33) as usize % (i + 1));
        }
        lines.splice(header_end..end, body);
        let permuted = parse_netlist(&lines.join("\n"));
        prop_assert!(!permuted.has_errors());
        let cfg = ErcConfig::default();
        let a = run_erc(&flatten(&net).unwrap(), &cfg);
        let b = run_erc(&flatten(&permuted).unwrap(), &cfg);
        prop_assert_eq!(a, b);
    }

    #[test]
    fn adding_a_device_keeps_model_and_arity_violations(
        (cards, sub, inst) in deck(),
        extra in card(),
    ) {
        let base_text = render(&cards, sub, inst).replace(".model pm", "* .model pm");
        let net = parse_netlist(&base_text);
        prop_assume!(!net.has_errors());
        let grown_text = base_text.replace(".end\n", &format!("{}.end\n", render_one(&extra, cards.len())));
        let grown = parse_netlist(&grown_text);
        prop_assume!(!grown.has_errors());
        let cfg = ErcConfig::default();
        let before = run_erc(&flatten(&net).unwrap(), &cfg);
        let after = run_erc(&flatten(&grown).unwrap(), &cfg);
        for v in before.violations.iter().filter(|v| matches!(v.rule_id, RuleId::Model | RuleId::Arity)) {
            prop_assert!(after.violations.contains(v), "lost {v:?}");
        }
    }

    #[test]
    fn spec_outcomes_are_complete_and_coded(
        expected in -1.0f64..6.0,
        tol in 1e-6f64..1.0,
        lo in -1.0f64..3.0,
        hi in 2.0f64..6.0,
        slope in -2.0f64..2.0,
        r2 in 1u32..100,
    ) {
        let text = format!("V1 in 0 5\nR1 in mid 1k\nR2 mid 0 {r2}k\n");
        let flat = flatten(&parse_netlist(&text)).unwrap();
        let spec = SpecRequirement::new(vec![
            Check::OpPoint { node: "mid".into(), expected, tol },
            Check::RailBound { node: "mid".into(), lo, hi },
            Check::LinearFit {
                output: "mid".into(), source: "V1".into(), start: 0.0, stop: 5.0,
                slope, slope_tol: 0.05, intercept: None, intercept_tol: None,
            },
            Check::Monotone {
                output: "mid".into(), source: "V1".into(), start: 0.0, stop: 5.0,
                direction: Direction::Decreasing,
            },
            Check::OpPoint { node: "nowhere".into(), expected, tol },
        ]);
        let opts = SolverOptions::default();
        let outcomes = evaluate_spec(&flat, &spec, &opts);
        prop_assert_eq!(outcomes.len(), spec.checks.len());
        for (o, c) in outcomes.iter().zip(&spec.checks) {
            prop_assert_eq!(&o.check, c);
            if !o.passed {
                let prefix = format!("{}:", c.code());
                prop_assert!(o.message.starts_with(&prefix), "{}", o.message);
            }
        }
        prop_assert_eq!(outcomes, evaluate_spec(&flat, &spec, &opts));
    }
}

fn render_one(c: &Card, i: usize) -> String {
    let text = render(std::slice::from_ref(c), false, 0);
    let line = text.lines().nth(3).unwrap();
    // Renumber so the new element never collides with an existing name.
    let (head, rest) = line.split_at(1);
    let rest = rest.split_once(' ').unwrap().1;
    format!("{head}{}x {rest}\n", i + 100)
}
