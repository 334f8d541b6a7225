use qaction_core::chaos::{
    anharmonic_model, compare_sections, generate_section, section_occupancy, section_thickness,
    SectionSpec,
};
use qaction_core::model::{ActionSpec, PolynomialPotential};

#[test]
fn crossings_stay_in_the_allowed_region() {
    let a = anharmonic_model(1.0, 0.5, 0.05).unwrap();
    let spec = SectionSpec::on_shell(&a, 10.0, 8, 3, 150, 0.01, 1e4).unwrap();
    let s = generate_section(&a, &spec).unwrap();
    assert!(s.energy_error() < 1e-8);
    for c in &s.points {
        assert!(c.state.q[1].abs() < 1e-10);
        assert!(c.state.p[1] > 0.0);
        let v = a.potential().eval(&[c.state.q[0], 0.0]);
        assert!(c.state.p[0].powi(2) / 2.0 <= 10.0 - v + 1e-8);
    }
    // Orbit ids ascend and crossing times ascend within an orbit.
    for w in s.points.windows(2) {
        assert!(w[0].orbit < w[1].orbit || (w[0].orbit == w[1].orbit && w[0].time < w[1].time));
    }
}

#[test]
fn sections_are_bitwise_reproducible() {
    let a = anharmonic_model(1.0, 0.5, 0.05).unwrap();
    let spec = SectionSpec::on_shell(&a, 20.0, 5, 7, 100, 0.01, 1e4).unwrap();
    let first = generate_section(&a, &spec).unwrap();
    let second = generate_section(&a, &spec).unwrap();
    assert_eq!(first, second);
    let bits = |s: &qaction_core::chaos::PoincareSection| {
        s.coordinates()
            .iter()
            .map(|c| (c.0, c.1.to_bits(), c.2.to_bits()))
            .collect::<Vec<_>>()
    };
    assert_eq!(bits(&first), bits(&second));
}

#[test]
fn integrable_orbits_are_thin_curves() {
    let a = ActionSpec::new(
        1.0,
        PolynomialPotential::two_d(&[((2, 0), 0.5), ((0, 2), 1.0)]).unwrap(),
    )
    .unwrap();
    let spec = SectionSpec::on_shell(&a, 1.0, 6, 0, 300, 0.01, 1e4).unwrap();
    let s = generate_section(&a, &spec).unwrap();
    for (o, t) in section_thickness(&s).unwrap().iter().enumerate() {
        assert!(*t < 1e-6, "orbit {o}: {t}");
    }
    for (o, init) in spec.initial.iter().enumerate() {
        let ex = 0.5 * init.p[0].powi(2) + 0.5 * init.q[0].powi(2);
        for c in s.points.iter().filter(|c| c.orbit == o) {
            let e = 0.5 * c.state.p[0].powi(2) + 0.5 * c.state.q[0].powi(2);
            assert!((e - ex).abs() < 1e-6);
        }
    }
}

#[test]
fn integrable_occupancy_scales_like_a_curve() {
    // Incommensurate frequencies, so a single orbit fills its x-ellipse.
    let pot = PolynomialPotential::two_d(&[((2, 0), 0.5), ((0, 2), 1.0)]).unwrap();
    let a = ActionSpec::new(1.0, pot).unwrap();
    let spec = SectionSpec::on_shell(&a, 1.0, 1, 0, 4000, 0.01, 1e5).unwrap();
    let s = generate_section(&a, &spec).unwrap();
    assert_eq!(s.points.len(), 4000);
    let (n1, n2) = (32usize, 128usize);
    let b1 = section_occupancy(&s, n1).unwrap();
    let b2 = section_occupancy(&s, n2).unwrap();
    // occupied ~ boxes^beta, with the allowed box count growing like boxes.
    let beta = 1.0 + (b2 / b1).ln() / ((n2 * n2) as f64 / (n1 * n1) as f64).ln();
    assert!(beta < 0.7, "exponent {beta}");
    assert!(beta > 0.3, "exponent {beta}");
}

#[test]
fn coinciding_actions_give_matching_sections() {
    let a = anharmonic_model(1.0, 0.5, 0.0).unwrap();
    let shifted = a.with_potential(a.potential().shifted(0.5));
    let c = generate_section(
        &a,
        &SectionSpec::above_minimum(&a, 2.0, 6, 0, 200, 0.01, 1e4).unwrap(),
    )
    .unwrap();
    let q = generate_section(
        &shifted,
        &SectionSpec::above_minimum(&shifted, 2.0, 6, 0, 200, 0.01, 1e4).unwrap(),
    )
    .unwrap();
    let r = compare_sections(&c, &q, 32).unwrap();
    assert!(r.symmetric_fraction < 0.05, "{}", r.symmetric_fraction);
    let other = generate_section(
        &a,
        &SectionSpec::on_shell(&a, 3.0, 6, 0, 50, 0.01, 1e4).unwrap(),
    )
    .unwrap();
    assert!(compare_sections(&c, &other, 32).is_err());
}

#[test]
fn reversed_initial_condition_mirrors_momentum() {
    let a = anharmonic_model(1.0, 0.5, 0.05).unwrap();
    let spec = SectionSpec::on_shell(&a, 5.0, 1, 11, 30, 0.005, 1e4).unwrap();
    let s = generate_section(&a, &spec).unwrap();
    let last = s.points.last().unwrap().state;
    // Reflecting y and reversing time keeps the y > 0 crossing direction.
    let mirror =
        qaction_core::trajectory::PhaseState::new([last.q[0], 0.0], [-last.p[0], last.p[1]]);
    let back = generate_section(
        &a,
        &SectionSpec::new(&a, 5.0, vec![mirror], 30, 0.005, 1e4).unwrap(),
    )
    .unwrap();
    let fwd = s.coordinates();
    let rev = back.coordinates();
    for (f, r) in fwd.iter().rev().zip(&rev) {
        assert!(
            (f.1 - r.1).abs() < 1e-8 && (f.2 + r.2).abs() < 1e-8,
            "{f:?} {r:?}"
        );
    }
}
