use menter_core::{
    emit, flatten, parse_netlist, run_erc, solve_op, ElementKind, ErcConfig, Netlist, SolverOptions,
};

fn load(name: &str) -> String {
    let path = format!("{}/../../fixtures/{name}", env!("CARGO_MANIFEST_DIR"));
    std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{path}: {e}"))
}

fn count(n: &Netlist, kind: ElementKind) -> usize {
    n.elements.iter().filter(|e| e.kind == kind).count()
}

#[test]
fn adder_20_0_structure() {
    let deck = parse_netlist(&load("adder_20_0.cir"));
    assert!(!deck.has_errors(), "{:?}", deck.diagnostics);
    assert_eq!(deck.title, "Opamp Adder");
    assert_eq!(deck.subckts.len(), 1);
    let sub = &deck.subckts["singlestageopamp"];
    assert_eq!(sub.ports, ["vinp", "vinn", "vout"]);
    assert_eq!(sub.body.len(), 7);
    assert_eq!(sub.body.iter().filter(|e| e.kind == ElementKind::Mosfet).count(), 5);
    assert_eq!(sub.local_models.len(), 2);
    assert_eq!(count(&deck, ElementKind::VSource), 4);
    assert_eq!(count(&deck, ElementKind::Resistor), 4);
    assert_eq!(count(&deck, ElementKind::SubcktInstance), 1);

    let flat = flatten(&deck).unwrap();
    let mos: Vec<&str> = flat
        .devices
        .iter()
        .filter(|d| d.kind == ElementKind::Mosfet)
        .map(|d| d.name.as_str())
        .collect();
    assert_eq!(mos, ["X1.M1", "X1.M2", "X1.M3", "X1.M4", "X1.M5"]);
    assert_eq!(flat.devices.iter().filter(|d| d.kind == ElementKind::VSource).count(), 6);
    assert_eq!(flat.device_count(), 15);
    assert!((flat.device("R1").unwrap().1.value.unwrap() - 20e3).abs() < 1e-9);
}

#[test]
fn both_decks_round_trip_and_pass_erc() {
    for name in ["adder_20_0.cir", "adder_20_1.cir"] {
        let deck = parse_netlist(&load(name));
        assert!(!deck.has_errors(), "{name}: {:?}", deck.diagnostics);
        let again = parse_netlist(&emit(&deck));
        assert!(!again.has_errors(), "{name}: {:?}", again.diagnostics);
        assert_eq!(again, deck, "{name}");
        assert_eq!(emit(&again), emit(&deck));

        let flat = flatten(&deck).unwrap();
        let report = run_erc(&flat, &ErcConfig::default());
        assert_eq!(report.errors().count(), 0, "{name}: {:?}", report.violations);
        assert!(report.passed);
    }
}

#[test]
fn both_decks_have_an_operating_point() {
    for name in ["adder_20_0.cir", "adder_20_1.cir"] {
        let flat = flatten(&parse_netlist(&load(name))).unwrap();
        let sol = solve_op(&flat, &SolverOptions::default()).unwrap();
        assert!(sol.converged, "{name}: {:?}", sol.diagnosis);
        let vout = sol.voltage("vout").unwrap();
        assert!((0.0..=5.0).contains(&vout), "{name}: vout={vout}");
    }
}

const FAULTY: [&str; 6] = [
    "V1 a b 5\nR1 a b 1k\n",
    "V1 a 0 5\nR1 a b 1k\nR2 c 0 1k\n",
    "V1 a 0 5\nV2 a a 1\nR1 a 0 1k\n",
    "V1 a 0 5\nM1 a a 0 0 missing\n",
    "V1 a 0 5\nR1 a b 1k\nC1 b c 1p\nR2 c d 1k\n",
    "V1 a 0 5\nM1 a g 0 0 nm\n.model nm nmos (vto=0.5 kp=1e-4)\n",
];

#[test]
fn failing_erc_is_backed_by_solver_or_only_warns() {
    for src in FAULTY {
        let flat = flatten(&parse_netlist(src)).unwrap();
        let report = run_erc(&flat, &ErcConfig::default());
        assert!(!report.violations.is_empty(), "{src}");
        if report.passed {
            continue;
        }
        match solve_op(&flat, &SolverOptions::default()) {
            Err(_) => {}
            Ok(sol) => assert!(!sol.converged, "{src} converged despite {:?}", report.violations),
        }
    }
}
