mod common;

use common::*;
use hippm::alm::{ConvexProgram, KnownSolution};
use hippm::instance::{parse, write, Instance, InstanceBody};
use hippm::{BoxNormalCone, HippmError, MonotoneOperator, Vector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn parse_line(text: &str) -> usize {
    match parse(text) {
        Err(HippmError::Parse { line, .. }) => line,
        other => panic!("expected a parse error, got {other:?}"),
    }
}

#[test]
fn bundled_instances_load() {
    for (file, kind, dim) in [
        ("skew2.txt", "inclusion", 2),
        ("strongly_monotone.txt", "inclusion", 2),
        ("quadbox.txt", "inclusion", 3),
        ("skew_multiscale.txt", "inclusion", 80),
        ("canonical_qp.txt", "qp", 2),
    ] {
        let inst = Instance::load(&instance_path(file)).unwrap();
        assert_eq!(inst.kind(), kind, "{file}");
        assert_eq!(inst.dimension, dim, "{file}");
        assert_eq!(parse(&write(&inst)).unwrap(), inst, "{file}");
    }
}

#[test]
fn skew2_contents() {
    let inst = Instance::load(&instance_path("skew2.txt")).unwrap();
    let InstanceBody::Inclusion { op, anchor, .. } = inst.body else { panic!() };
    assert_eq!(op, skew2());
    assert_eq!(anchor, Some(v(&[1.0, 0.0])));
}

#[test]
fn canonical_qp_contents() {
    let inst = Instance::load(&instance_path("canonical_qp.txt")).unwrap();
    let InstanceBody::Qp { program, y0 } = inst.body else { panic!() };
    assert_eq!(program.optimum(), Some(0.5));
    assert_eq!(program.constraints(), 1);
    assert_eq!(y0, Some(v(&[0.0])));
    assert_eq!(program.objective(&v(&[1.0, 0.0])), 0.5);
}

#[test]
fn errors_carry_line_numbers() {
    let base = "kind inclusion\nname t\nfamily affine\ndimension 2\n[M]\n0 -1\n1 0\n";
    assert!(parse(base).is_ok());
    assert_eq!(parse_line(&format!("{base}[anchor]\n1 x\n")), 9);
    assert_eq!(parse_line(&format!("{base}[anchor]\n1 2 3\n")), 8);
    assert_eq!(parse_line("kind inclusion\nname t\nfamily affine\ndimension 2\n[M]\n0 -1 0\n1 0\n"), 5);
    assert_eq!(parse_line("kind inclusion\nname t\nfamily blob\ndimension 2\n"), 3);
    assert_eq!(parse_line("kind qp\nname t\ndimension 2\nconstraints 1\n[Q]\n1 0\n0 1\n[A]\n1\n"), 8);
    assert!(matches!(parse("name t\n"), Err(HippmError::Parse { .. })));
}

#[test]
fn non_monotone_rejected() {
    let text = "kind inclusion\nname t\nfamily affine\ndimension 1\n[M]\n-1\n";
    assert!(matches!(parse(text), Err(HippmError::NotMonotone(_))));
}

#[test]
fn load_missing_file_fails() {
    assert!(Instance::load(&instance_path("does_not_exist.txt")).is_err());
}

fn random_instance(seed: u64) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(1..=5);
    let pick = rng.gen_range(0..5);
    let anchor = rng.gen_bool(0.5).then(|| gaussian_vec(&mut rng, n, 2.0));
    let body = match pick {
        0..=3 => {
            let op: MonotoneOperator = match pick {
                0 => random_affine(&mut rng, n),
                1 => random_box(&mut rng, n).into(),
                2 => random_scaled_skew(&mut rng, n),
                _ => random_quadratic_box(&mut rng, n),
            };
            InstanceBody::Inclusion {
                op,
                anchor,
                z_star: rng.gen_bool(0.5).then(|| gaussian_vec(&mut rng, n, 1.0)),
            }
        }
        _ => {
            let m = rng.gen_range(0..=3);
            let mut program = ConvexProgram::new(
                random_psd(&mut rng, n, 0.1),
                gaussian_vec(&mut rng, n, 1.0),
                random_matrix(&mut rng, m, n),
                gaussian_vec(&mut rng, m, 1.0),
                if rng.gen_bool(0.5) { random_box(&mut rng, n) } else { BoxNormalCone::unbounded(n) },
            )
            .unwrap();
            if rng.gen_bool(0.5) {
                program = program
                    .with_solution(KnownSolution {
                        x: Some(gaussian_vec(&mut rng, n, 1.0)),
                        y: Some(Vector::from_fn(m, |_, _| rng.gen::<f64>())),
                        optimum: Some(rng.gen_range(-3.0..3.0)),
                    })
                    .unwrap();
            }
            InstanceBody::Qp {
                program,
                y0: rng.gen_bool(0.5).then(|| Vector::from_fn(m, |_, _| rng.gen::<f64>())),
            }
        }
    };
    Instance {
        name: format!("random{seed}"),
        dimension: n,
        body,
    }
}

proptest! {
    #[test]
    fn write_then_parse_is_identity(seed in any::<u64>()) {
        let inst = random_instance(seed);
        let text = write(&inst);
        let back = parse(&text).unwrap();
        prop_assert_eq!(&back, &inst);
        prop_assert_eq!(write(&back), text);
    }
}
