mod common;

use proptest::prelude::*;
use qmaxwell::curl::{assemble_generator, skew_defect};
use qmaxwell::grid::{Boundary, Faces, GridSpec, Scatterer};

use common::{max_abs_diff, random_state, stencil_apply};

fn check(spec: &GridSpec, seed: u64) -> f64 {
    let a = assemble_generator(spec).unwrap();
    let u = random_state(spec, seed);
    max_abs_diff(&a.matvec(&u).unwrap(), &stencil_apply(spec, &u))
}

fn mixed_faces() -> Faces {
    let mut f = Faces::uniform(Boundary::Pmc);
    f.set(qmaxwell::grid::Axis::X, true, Boundary::Pec);
    f.set(qmaxwell::grid::Axis::Z, false, Boundary::Pec);
    f
}

#[test]
fn matches_stencil_in_2d() {
    for (nx, ny) in [(2, 2), (4, 4), (8, 8), (8, 4), (2, 8)] {
        for faces in [Faces::uniform(Boundary::Pmc), Faces::uniform(Boundary::Pec), mixed_faces()] {
            let spec = GridSpec::new_2d(nx, ny).unwrap().with_boundaries(faces);
            let d = check(&spec, 7);
            assert!(d < 1e-12, "{nx}x{ny}: {d}");
        }
    }
}

#[test]
fn matches_stencil_in_3d() {
    for n in [[2, 2, 2], [4, 4, 4], [4, 2, 4]] {
        for faces in [Faces::uniform(Boundary::Pmc), Faces::uniform(Boundary::Pec), mixed_faces()] {
            let spec = GridSpec::new_3d(n[0], n[1], n[2]).unwrap().with_boundaries(faces);
            let d = check(&spec, 11);
            assert!(d < 1e-12, "{n:?}: {d}");
        }
    }
}

#[test]
fn matches_stencil_with_scatterer() {
    let body = Scatterer::new_2d([2, 2], [6, 6]);
    let spec = GridSpec::new_2d(8, 8).unwrap().with_scatterer(body).unwrap();
    assert!(check(&spec, 3) < 1e-12);

    let mut pec = body;
    pec.faces = Faces::uniform(Boundary::Pec);
    let spec = GridSpec::new_2d(8, 8).unwrap().with_scatterer(pec).unwrap();
    assert!(check(&spec, 4) < 1e-12);

    let body = Scatterer::new_3d([2, 2, 2], [6, 6, 6]);
    let spec = GridSpec::new_3d(8, 8, 8).unwrap().with_scatterer(body).unwrap();
    assert!(check(&spec, 5) < 1e-12);
}

#[test]
fn pec_box_is_skew() {
    for spec in [
        GridSpec::new_2d(8, 8).unwrap(),
        GridSpec::new_3d(4, 4, 4).unwrap(),
    ] {
        let spec = spec.with_boundaries(Faces::uniform(Boundary::Pec));
        let a = assemble_generator(&spec).unwrap();
        assert!(skew_defect(&a).defect < 1e-14);
    }
}

#[test]
fn triplet_dump_parses_back() {
    let spec = GridSpec::new_2d(4, 4).unwrap();
    let a = assemble_generator(&spec).unwrap();
    let mut buf = Vec::new();
    a.write_triplets(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap();
    assert!(header.starts_with('#'));
    let body: Vec<&str> = lines.collect();
    assert_eq!(body.len(), a.nnz());
    for l in body {
        let f: Vec<&str> = l.split_whitespace().collect();
        let (r, c, v): (usize, usize, f64) = (f[0].parse().unwrap(), f[1].parse().unwrap(), f[2].parse().unwrap());
        assert_eq!(a.get(r, c), v);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn stencil_agrees_on_random_grids(
        lx in 1u32..4, ly in 1u32..4,
        dx in 0.3f64..2.0, dy in 0.3f64..2.0,
        eps in 0.5f64..4.0, mu in 0.5f64..4.0,
        pec in any::<bool>(), seed in any::<u64>(),
    ) {
        let faces = Faces::uniform(if pec { Boundary::Pec } else { Boundary::Pmc });
        let spec = GridSpec::new_2d(1 << lx, 1 << ly).unwrap()
            .with_boundaries(faces)
            .with_spacing(dx, dy, 1.0).unwrap()
            .with_material(eps, mu).unwrap();
        prop_assert!(check(&spec, seed) < 1e-12);
    }

    #[test]
    fn generator_is_real_and_zero_on_padding(lx in 1u32..4, ly in 1u32..4, seed in any::<u64>()) {
        let spec = GridSpec::new_2d(1 << lx, 1 << ly).unwrap();
        let a = assemble_generator(&spec).unwrap();
        let du = a.matvec(&random_state(&spec, seed)).unwrap();
        let mask = spec.active_mask();
        for (v, m) in du.iter().zip(mask) {
            prop_assert!(m || *v == 0.0);
        }
    }
}
