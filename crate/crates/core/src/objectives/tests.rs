use super::*;
use proptest::prelude::*;

fn abc(rows: &[&[i32]]) -> PhotonicState {
    PhotonicState::basis_sum(&[Path(0), Path(1), Path(2)], rows).unwrap()
}

fn ghz3() -> PhotonicState {
    abc(&[&[0, 0, 0], &[1, 1, 1], &[2, 2, 2]])
}

#[test]
fn cheap_check_examples() {
    assert!(cheap_state_check(&ghz3(), 3));
    assert!(!cheap_state_check(&abc(&[&[0, 0, 0], &[1, 1, 1]]), 3));
    assert!(!cheap_state_check(&abc(&[&[0, 0, 0], &[0, 1, 1], &[0, 2, 2]]), 3));
    assert!(!cheap_state_check(&PhotonicState::empty(3), 2));
}

#[test]
fn ghz_examples() {
    let cert = ghz_match(&ghz3(), 3, false).unwrap();
    assert_eq!(cert.slot_modes, vec![vec![0, 1, 2]; 3]);
    assert!(cert.mavericks.is_empty());
    assert_eq!(cert.ratios, vec![CycNum::one(); 3]);

    let near = abc(&[&[0, 0, 0], &[1, 1, 1], &[2, 2, 1]]);
    assert!(ghz_match(&near, 3, false).is_none());
    assert!(ghz_match(&near, 3, true).is_none());

    let extra = abc(&[&[0, 0, 0], &[1, 1, 1], &[2, 2, 2], &[3, 0, 1]]);
    assert!(ghz_match(&extra, 3, false).is_none());
    let cert = ghz_match(&extra, 3, true).unwrap();
    assert_eq!(cert.mavericks.len(), 1);
    assert_eq!(cert.mavericks[0].slots, vec![0]);
    assert_eq!(cert.filters[0], SlotFilter { path: Path(0), keep: vec![0, 1, 2] });
}

#[test]
fn ghz_rejects_terms_inside_the_core_sets() {
    // |012⟩ uses only core modes, so no local projector can remove it.
    let st = abc(&[&[0, 0, 0], &[1, 1, 1], &[2, 2, 2], &[0, 1, 2]]);
    assert!(ghz_match(&st, 3, true).is_none());
    // Picking a different core can still work.
    let st = abc(&[&[0, 0, 0], &[1, 1, 1], &[2, 2, 2], &[3, 3, 3]]);
    let cert = ghz_match(&st, 3, true).unwrap();
    assert_eq!(cert.mavericks[0].slots, vec![0, 1, 2]);
    assert!(ghz_match(&st, 4, false).is_some());
}

#[test]
fn ghz_ratios_carry_phases() {
    let st = PhotonicState::from_terms(
        3,
        ghz3().iter().enumerate().map(|(i, (t, a))| (t.clone(), a * &CycNum::phase(2 * i as i64))),
    )
    .unwrap();
    let cert = ghz_match(&st, 3, false).unwrap();
    assert_eq!(cert.ratios, vec![CycNum::one(), CycNum::i(), CycNum::from_integer(-1)]);
}

#[test]
fn srv_objective_examples() {
    let reg = SrvRegistry::new();
    let target: BTreeSet<Srv> = [Srv::new(vec![3, 3, 3])].into();
    assert_eq!(srv_objective(&ghz3(), Some(&target), &reg), Some((Srv::new(vec![3, 3, 3]), true)));

    assert_eq!(srv_objective(&abc(&[&[0, 0, 0]]), None, &reg), None);

    let st = abc(&[&[0, 0, 0], &[1, 0, 1], &[2, 1, 0], &[3, 1, 1]]);
    let scan = SrvRegistry::new();
    assert_eq!(srv_objective(&st, None, &scan), Some((Srv::new(vec![4, 2, 2]), true)));
    assert_eq!(srv_objective(&st, None, &scan), Some((Srv::new(vec![4, 2, 2]), false)));
    assert_eq!(scan.snapshot()[&Srv::new(vec![4, 2, 2])], 2);
}

#[test]
fn registry_novelty_is_observed_once_across_threads() {
    let reg = SrvRegistry::new();
    let srvs: Vec<Srv> = (2..6).map(|r| Srv::new(vec![r, r, 2])).collect();
    let novel: usize = std::thread::scope(|s| {
        let handles: Vec<_> =
            (0..8).map(|_| s.spawn(|| srvs.iter().cycle().take(400).filter(|x| reg.insert(x)).count())).collect();
        handles.into_iter().map(|h| h.join().unwrap()).sum()
    });
    assert_eq!(novel, srvs.len());
    assert_eq!(reg.snapshot().values().sum::<u64>(), 3200);
}

fn parity_shift(c: i32, t: i32) -> Option<GateResponse> {
    let shift = c.rem_euclid(2);
    Some(GateResponse { control: c, target: (t + shift).rem_euclid(3) })
}

#[test]
fn gate_examples() {
    let cert = gate_match(&parity_shift, &[0, 1], &[0, 1, 2], 2, 3).unwrap().unwrap();
    assert_eq!(cert.control_out, vec![vec![0; 3], vec![1; 3]]);
    assert_eq!(cert.target_out, vec![vec![0, 1, 2], vec![1, 2, 0]]);

    let identity = |c, t| Some(GateResponse { control: c, target: t });
    assert_eq!(gate_match(&identity, &[0, 1], &[0, 1, 2], 2, 3).unwrap(), None);

    let collide = |c: i32, t: i32| {
        let r = parity_shift(c, t)?;
        Some(if c == 1 && t == 0 { GateResponse { target: 2, ..r } } else { r })
    };
    assert_eq!(gate_match(&collide, &[0, 1], &[0, 1, 2], 2, 3).unwrap(), None);

    // Subsets: extra probe modes with unusable outputs are skipped.
    let noisy = |c: i32, t: i32| if t == 5 || c == 7 { None } else { parity_shift(c, t) };
    let cert = gate_match(&noisy, &[7, 0, 1], &[5, 0, 1, 2], 2, 3).unwrap().unwrap();
    assert_eq!(cert.control_in, vec![0, 1]);
    assert_eq!(cert.target_in, vec![0, 1, 2]);
}

#[test]
fn gate_setup_probing() {
    let mut s = Setup::standard(3);
    // An empty chain is the identity gate.
    let gate = GateSetup::from_setup(&s).unwrap();
    assert_eq!(gate.probe(1, -1).unwrap(), Some(GateResponse { control: 1, target: -1 }));
    let modes = gate.modes();
    assert!(gate.table(&modes, &modes).unwrap().find(2, 3).is_none());

    // A beam splitter between control and target makes superpositions.
    s.elements = vec!["BS[a,b]".parse().unwrap()];
    let gate = GateSetup::from_setup(&s).unwrap();
    assert_eq!(gate.probe(1, 0).unwrap(), None);

    // A hologram on the target shifts it regardless of the control: the
    // columns of both control rows coincide, so no gate.
    s.elements = vec!["Holo[b,+1]".parse().unwrap()];
    let gate = GateSetup::from_setup(&s).unwrap();
    assert_eq!(gate.probe(0, 0).unwrap(), Some(GateResponse { control: 0, target: 1 }));
    assert!(!Objective::GatePattern { d_control: 2, d_target: 3 }.holds(&s));
}

#[test]
fn heralded_gate_setup() {
    // An ancilla pair on (c,d) with a herald on d:0 and a parity sorter that
    // exchanges odd target modes with the ancilla path.
    let gate = GateSetup {
        options: SimOptions { max_oam: 1, ..SimOptions::default() },
        ancillas: vec![Spdc::new(Path(2), Path(3), 1)],
        elements: vec!["LI[b,c]".parse().unwrap()],
        control: (Path(0), Path(0)),
        target: (Path(1), Path(1)),
        heralds: vec![ModeLabel::new(Path(3), 0)],
    };
    // Even target: b keeps it, c keeps the ancilla photon: stray photon, no event.
    assert_eq!(gate.probe(0, 0).unwrap(), None);
}

#[test]
fn objective_text() {
    for s in ["ghz:3", "ghz:2+mavericks", "srv:(3,3,2),(4,2,2)", "scan", "gate:2x3", "state:0.9:(1) |a:0 b:0 c:0⟩"] {
        assert_eq!(s.parse::<Objective>().unwrap().to_string(), s);
    }
    for s in ["ghz:1", "ghz", "srv:", "gate:1x3", "state:1.5:(1) |a:0⟩", "nope", "scan:3"] {
        assert!(s.parse::<Objective>().is_err(), "{s}");
    }
    let srv: Objective = "srv:(3,3,2),(4,2,2)".parse().unwrap();
    assert_eq!(srv.cheap_dims(), Some(2));
}

#[test]
fn objective_evaluation_and_pinning() {
    let reg = SrvRegistry::new();
    let scan = Objective::SrvScan;
    let cert = scan.evaluate_state(&ghz3(), &reg).unwrap();
    assert_eq!(cert, Certificate::Srv { srv: Srv::new(vec![3, 3, 3]), novel: true });
    assert_eq!(scan.pinned(&cert).to_string(), "srv:(3,3,3)");
    let fid: Objective = format!("state:0.99:{}", ghz3()).parse().unwrap();
    assert!(matches!(fid.evaluate_state(&ghz3(), &reg), Some(Certificate::Fidelity { .. })));
    let json = serde_json::to_string(&cert).unwrap();
    assert_eq!(json, r#"{"kind":"srv","srv":"(3,3,3)","novel":true}"#);
    let ghz = Certificate::Ghz(ghz_match(&ghz3(), 3, false).unwrap());
    let back: Certificate = serde_json::from_str(&serde_json::to_string(&ghz).unwrap()).unwrap();
    assert_eq!(back, ghz);
}

/// Independent check: every pair of cells that shares a row (different
/// columns) or shares a column (different rows) must differ in target output.
fn brute_force(table: &GateTable, dc: usize, dt: usize) -> bool {
    let nc = table.controls.len();
    let nt = table.targets.len();
    (0..nc).combinations(dc).any(|rows| {
        (0..nt).combinations(dt).any(|cols| {
            let cells: Vec<(usize, usize, Option<i32>)> = rows
                .iter()
                .flat_map(|&r| cols.iter().map(move |&c| (r, c, table.cells[r][c].map(|g| g.target))))
                .collect();
            cells.iter().all(|x| x.2.is_some())
                && cells.iter().tuple_combinations().all(|(x, y)| {
                    let linked = (x.0 == y.0) != (x.1 == y.1);
                    !linked || x.2 != y.2
                })
        })
    })
}

fn random_table() -> impl Strategy<Value = GateTable> {
    (2usize..4, 3usize..6).prop_flat_map(|(nc, nt)| {
        let cell = prop::option::weighted(0.9, (-2i32..3, 0i32..4))
            .prop_map(|o| o.map(|(control, target)| GateResponse { control, target }));
        prop::collection::vec(prop::collection::vec(cell, nt), nc).prop_map(move |cells| GateTable {
            controls: (0..nc as i32).collect(),
            targets: (0..nt as i32).collect(),
            cells,
        })
    })
}

fn random_state() -> impl Strategy<Value = PhotonicState> {
    let row = prop::collection::vec(0i32..4, 3);
    let amp = (0i64..8).prop_map(CycNum::phase);
    prop::collection::vec((row, amp), 1..7).prop_map(|rows| {
        let terms = rows
            .into_iter()
            .map(|(r, a)| (FockTerm::new(r.iter().enumerate().map(|(s, m)| ModeLabel::new(Path(s as u8), *m))), a));
        PhotonicState::from_terms(3, terms).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn gate_search_agrees_with_brute_force(table in random_table()) {
        prop_assert_eq!(table.find(2, 3).is_some(), brute_force(&table, 2, 3));
    }

    #[test]
    fn cheap_check_is_sound(st in random_state(), dims in 2usize..4) {
        if !cheap_state_check(&st, dims) && !st.is_empty() {
            prop_assert!(ghz_match(&st, dims, true).is_none());
            prop_assert!(ghz_match(&st, dims, false).is_none());
            prop_assert!(!st.srv().unwrap().all_at_least(dims));
        }
    }

    #[test]
    fn ghz_core_has_full_srv(st in random_state(), dims in 2usize..4) {
        if let Some(cert) = ghz_match(&st, dims, true) {
            prop_assert_eq!(cert.core_state().srv().unwrap(), Srv::new(vec![dims; 3]));
            if cert.mavericks.is_empty() {
                prop_assert_eq!(st.srv().unwrap(), Srv::new(vec![dims; 3]));
            }
        }
    }

    #[test]
    fn ghz_ignores_mode_relabelling_and_phases(
        st in random_state(),
        perm in Just([0i32, 1, 2, 3]).prop_shuffle(),
        slot in 0usize..3,
        phases in prop::collection::vec(0i64..8, 6),
        dims in 2usize..4,
        mav in any::<bool>(),
    ) {
        let moved = PhotonicState::from_terms(3, st.iter().enumerate().map(|(i, (t, a))| {
            let labels = t.labels().iter().enumerate().map(|(s, l)| {
                if s == slot { ModeLabel::new(l.path, perm[l.oam as usize]) } else { *l }
            });
            (FockTerm::new(labels), a * &CycNum::phase(phases[i]))
        })).unwrap();
        prop_assert_eq!(ghz_match(&st, dims, mav).is_some(), ghz_match(&moved, dims, mav).is_some());
    }
}
