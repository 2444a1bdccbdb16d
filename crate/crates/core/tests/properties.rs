//! Invariant tests: linearity, translation and relabeling symmetry, the
//! simplex/determinant correspondence, and reduction determinism.

use proptest::prelude::*;

use digidiff::io::report_json_string;
use digidiff::{
    central_det, corner_det, fold_measure_cell, generate, jacobian_map, nda, ndv,
    scheme_simplices, star_det, DisplacementField, GridDims, GridPoint, JacobianVariant, Scheme,
    SignPattern, StarKind, SynthKind, SynthSpec,
};

fn random_field(extents: &[usize], seed: u64, amplitude: f64) -> DisplacementField {
    generate(&SynthSpec {
        kind: SynthKind::RandomSmooth {
            seed,
            amplitude,
            radius: 0,
        },
        dims: GridDims::isotropic(extents).unwrap(),
    })
    .unwrap()
}

/// Test-side determinant oracle (cofactor expansion).
fn matrix_det(m: &[f64], rank: usize) -> f64 {
    if rank == 2 {
        m[0] * m[3] - m[1] * m[2]
    } else {
        m[0] * (m[4] * m[8] - m[5] * m[7]) - m[1] * (m[3] * m[8] - m[5] * m[6])
            + m[2] * (m[3] * m[7] - m[4] * m[6])
    }
}

fn shift_field(field: &DisplacementField, delta: &[f64]) -> DisplacementField {
    let rank = field.rank();
    let mut data = field.data().to_vec();
    for chunk in data.chunks_mut(rank) {
        for (v, d) in chunk.iter_mut().zip(delta) {
            *v += d;
        }
    }
    DisplacementField::new(field.dims().clone(), data).unwrap()
}

/// Relabels axes: new axis `a` carries what old axis `perm[a]` carried.
fn permute_axes(field: &DisplacementField, perm: &[usize]) -> DisplacementField {
    let dims = field.dims();
    let rank = dims.rank();
    let extents: Vec<usize> = perm.iter().map(|&a| dims.extent(a)).collect();
    let spacings: Vec<f64> = perm.iter().map(|&a| dims.spacing(a)).collect();
    let new_dims = GridDims::new(&extents, &spacings).unwrap();
    let mut data = vec![0.0; new_dims.num_points() * rank];
    for p in dims.points() {
        let u = field.displacement(p);
        let mut q = [0usize; 3];
        for a in 0..rank {
            q[a] = p.0[perm[a]];
        }
        let qi = new_dims.linear_index(GridPoint(q));
        for a in 0..rank {
            data[qi * rank + a] = u[perm[a]];
        }
    }
    DisplacementField::new(new_dims, data).unwrap()
}

fn permute_pattern(pattern: SignPattern, perm: &[usize]) -> SignPattern {
    match perm.len() {
        2 => SignPattern::d2(pattern.sign(perm[0]), pattern.sign(perm[1])),
        _ => SignPattern::d3(
            pattern.sign(perm[0]),
            pattern.sign(perm[1]),
            pattern.sign(perm[2]),
        ),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    // For u(p) = (A - I) p, every corner and central determinant equals
    // det(A); the star determinants equal 2 det(A).
    #[test]
    fn linear_map_law_2d(entries in prop::collection::vec(-1.5f64..1.5, 4)) {
        let dims = GridDims::isotropic(&[6, 5]).unwrap();
        let field = generate(&SynthSpec {
            kind: SynthKind::Linear { matrix: entries.clone() },
            dims,
        }).unwrap();
        let expected = matrix_det(&entries, 2);
        for p in field.dims().points() {
            for pattern in SignPattern::all(2) {
                if let Ok(det) = corner_det(&field, p, pattern) {
                    prop_assert!((det - expected).abs() <= 1e-9);
                }
            }
            if let Ok(det) = central_det(&field, p) {
                prop_assert!((det - expected).abs() <= 1e-9);
            }
        }
    }

    #[test]
    fn linear_map_law_3d(entries in prop::collection::vec(-1.5f64..1.5, 9)) {
        let dims = GridDims::isotropic(&[5, 4, 4]).unwrap();
        let field = generate(&SynthSpec {
            kind: SynthKind::Linear { matrix: entries.clone() },
            dims,
        }).unwrap();
        let expected = matrix_det(&entries, 3);
        for p in field.dims().points() {
            for pattern in SignPattern::all(3) {
                if let Ok(det) = corner_det(&field, p, pattern) {
                    prop_assert!((det - expected).abs() <= 1e-9);
                }
            }
            for kind in [StarKind::One, StarKind::Two] {
                if let Ok(det) = star_det(&field, p, kind) {
                    prop_assert!((det - 2.0 * expected).abs() <= 1e-9);
                }
            }
        }
    }

    // Adding a constant vector to every displacement is invisible to the
    // difference stencils.
    #[test]
    fn translation_invariance(seed in 0u64..1000, shift in prop::collection::vec(-20.0f64..20.0, 3)) {
        let field = random_field(&[6, 5, 4], seed, 1.0);
        let shifted = shift_field(&field, &shift);
        for variant in JacobianVariant::criterion_variants(3)
            .into_iter()
            .chain([JacobianVariant::Central])
        {
            let a = jacobian_map(&field, variant).unwrap();
            let b = jacobian_map(&shifted, variant).unwrap();
            prop_assert_eq!(a.defined(), b.defined());
            for (x, y) in a.iter_defined().zip(b.iter_defined()) {
                prop_assert!((x.1 - y.1).abs() <= 1e-12);
            }
        }
    }

    // NDA/NDV is zero exactly when no defined determinant is strictly
    // negative.
    #[test]
    fn zero_law(seed in 0u64..1000, amplitude in 0.0f64..2.5) {
        let field = random_field(&[7, 6], seed, amplitude);
        let (report, _) = nda(&field, None).unwrap();
        let mut min_det = f64::INFINITY;
        for variant in JacobianVariant::criterion_variants(2) {
            let map = jacobian_map(&field, variant).unwrap();
            for (_, v) in map.iter_defined() {
                min_det = min_det.min(v);
            }
        }
        prop_assert_eq!(report.measure_voxel == 0.0, min_det >= 0.0);
    }

    // The severity map carries exactly the per-point shares of the measure.
    #[test]
    fn severity_sums_to_measure(seed in 0u64..1000, amplitude in 0.0f64..3.0) {
        let field = random_field(&[6, 6, 5], seed, amplitude);
        let (report, severity) = ndv(&field, None).unwrap();
        let total: f64 = severity.values().iter().sum();
        prop_assert!((total - report.measure_voxel).abs() <= 1e-9);
        prop_assert!(severity.values().iter().all(|&v| v >= 0.0));
    }
}

#[test]
fn axis_relabeling_leaves_determinants_unchanged() {
    let field2 = random_field(&[7, 5], 42, 1.3);
    let perm2 = [1usize, 0];
    let swapped = permute_axes(&field2, &perm2);
    for pattern in SignPattern::all(2) {
        for p in field2.dims().points() {
            let q = GridPoint([p.0[1], p.0[0], 0]);
            let a = corner_det(&field2, p, pattern);
            let b = corner_det(&swapped, q, permute_pattern(pattern, &perm2));
            match (a, b) {
                (Ok(x), Ok(y)) => assert!((x - y).abs() <= 1e-12),
                (Err(_), Err(_)) => {}
                other => panic!("defined-ness must match: {other:?}"),
            }
        }
    }

    let field3 = random_field(&[5, 4, 6], 43, 1.3);
    for perm in [[1usize, 0, 2], [2, 1, 0], [0, 2, 1], [1, 2, 0], [2, 0, 1]] {
        let permuted = permute_axes(&field3, &perm);
        for pattern in SignPattern::all(3) {
            for p in field3.dims().points() {
                let mut q = [0usize; 3];
                for a in 0..3 {
                    q[a] = p.0[perm[a]];
                }
                let a = corner_det(&field3, p, pattern);
                let b = corner_det(&permuted, GridPoint(q), permute_pattern(pattern, &perm));
                match (a, b) {
                    (Ok(x), Ok(y)) => assert!((x - y).abs() <= 1e-12),
                    (Err(_), Err(_)) => {}
                    other => panic!("defined-ness must match: {other:?}"),
                }
            }
        }
    }
}

#[test]
fn identity_law_all_variants() {
    let field2 = DisplacementField::zeros(GridDims::isotropic(&[5, 5]).unwrap());
    for variant in JacobianVariant::criterion_variants(2)
        .into_iter()
        .chain([JacobianVariant::Central])
    {
        let map = jacobian_map(&field2, variant).unwrap();
        assert!(map.iter_defined().all(|(_, v)| v == 1.0));
    }
    let field3 = DisplacementField::zeros(GridDims::isotropic(&[4, 4, 4]).unwrap());
    for variant in JacobianVariant::criterion_variants(3)
        .into_iter()
        .chain([JacobianVariant::Central])
    {
        let expected = match variant {
            JacobianVariant::Star(_) => 2.0,
            _ => 1.0,
        };
        let map = jacobian_map(&field3, variant).unwrap();
        assert!(map.defined_count() > 0);
        assert!(map.iter_defined().all(|(_, v)| v == expected));
    }
}

// At amplitude 0.1 no simplex can fold: the measure is zero and every
// per-cell fold measure vanishes under both schemes.
#[test]
fn fold_free_small_amplitude_cells_have_zero_fold() {
    for seed in 0..12u64 {
        let field = random_field(&[6, 5, 5], 300 + seed, 0.1);
        assert_eq!(ndv(&field, None).unwrap().0.measure_voxel, 0.0);
        for cell in field.dims().cells() {
            assert_eq!(fold_measure_cell(&field, cell, Scheme::A).unwrap(), 0.0);
            assert_eq!(fold_measure_cell(&field, cell, Scheme::B).unwrap(), 0.0);
        }
    }
}

// When the transformation is linear over a cell, the two schemes measure
// the same transformed volume: det(A) per unit cell. (For general vertex
// motion the schemes interpolate different piecewise-linear maps and their
// totals legitimately differ, so equality is only asserted here.)
#[test]
fn linear_cells_measure_det_under_both_schemes() {
    let cases: [Vec<f64>; 3] = [
        vec![1.2, 0.3, -0.1, 0.9, 1.1, 0.2, 0.05, -0.3, 0.8],
        vec![0.7, 0.0, 0.0, 0.0, 1.4, 0.0, 0.0, 0.0, 1.0],
        vec![1.0, 0.5, 0.0, -0.4, 0.9, 0.1, 0.2, 0.0, 1.3],
    ];
    for matrix in cases {
        let expected = matrix_det(&matrix, 3);
        let field = generate(&SynthSpec {
            kind: SynthKind::Linear {
                matrix: matrix.clone(),
            },
            dims: GridDims::isotropic(&[4, 4, 4]).unwrap(),
        })
        .unwrap();
        for scheme in Scheme::BOTH {
            let simplices = scheme_simplices(scheme, 3).unwrap();
            for cell in field.dims().cells() {
                let vol: f64 = simplices
                    .iter()
                    .map(|s| digidiff::geometry::simplex_measure(&field, cell, s).unwrap())
                    .sum();
                assert!(
                    (vol - expected).abs() <= 1e-9,
                    "cell {cell:?} scheme {scheme:?}: {vol} vs det {expected}"
                );
            }
        }
    }
}

// Every determinant is six times its simplex's corrected measure (exact to
// 1e-12), and folding coincides with a non-positive determinant.
#[test]
fn fold_sign_matches_determinant_sign() {
    for seed in 0..6u64 {
        let field = random_field(&[6, 6, 5], 500 + seed, 2.2);
        for scheme in Scheme::BOTH {
            for simplex in scheme_simplices(scheme, 3).unwrap() {
                for cell in field.dims().cells() {
                    let measure =
                        digidiff::geometry::simplex_measure(&field, cell, &simplex).unwrap();
                    let anchor = simplex.anchor();
                    let at = GridPoint([
                        cell.0[0] + anchor[0],
                        cell.0[1] + anchor[1],
                        cell.0[2] + anchor[2],
                    ]);
                    let det = match simplex.variant {
                        JacobianVariant::Corner(p) => corner_det(&field, at, p).unwrap(),
                        JacobianVariant::Star(k) => star_det(&field, at, k).unwrap(),
                        JacobianVariant::Central => unreachable!(),
                    };
                    assert!(
                        (det - 6.0 * measure).abs() <= 1e-12,
                        "cell {cell:?} {}: det {det} vs 6 x {measure}",
                        simplex.variant
                    );
                    if det.abs() > 1e-12 {
                        assert_eq!(measure < 0.0, det < 0.0);
                    }
                }
            }
        }
    }
}

#[test]
fn map_values_independent_of_thread_count() {
    let field = random_field(&[40, 35, 30], 88, 1.1);
    let reference = jacobian_map(&field, JacobianVariant::Central).unwrap();
    for threads in [1usize, 3] {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap();
        let map = pool.install(|| jacobian_map(&field, JacobianVariant::Central).unwrap());
        assert_eq!(map.defined(), reference.defined());
        let bits_a: Vec<u64> = map.values().iter().map(|v| v.to_bits()).collect();
        let bits_b: Vec<u64> = reference.values().iter().map(|v| v.to_bits()).collect();
        assert_eq!(bits_a, bits_b);
    }
}

#[test]
fn repeated_analysis_is_bit_identical() {
    let field = random_field(&[12, 10, 9], 77, 1.4);
    let (r1, s1) = ndv(&field, None).unwrap();
    let (r2, s2) = ndv(&field, None).unwrap();
    assert_eq!(r1.measure_voxel.to_bits(), r2.measure_voxel.to_bits());
    assert_eq!(
        report_json_string(&r1).unwrap(),
        report_json_string(&r2).unwrap()
    );
    let bits1: Vec<u64> = s1.values().iter().map(|v| v.to_bits()).collect();
    let bits2: Vec<u64> = s2.values().iter().map(|v| v.to_bits()).collect();
    assert_eq!(bits1, bits2);
}

// Small-amplitude smooth fields stay diffeomorphic (the documented
// random_smooth sanity case).
#[test]
fn small_amplitude_smooth_field_has_zero_ndv() {
    let field = generate(&SynthSpec {
        kind: SynthKind::RandomSmooth {
            seed: 7,
            amplitude: 0.1,
            radius: 2,
        },
        dims: GridDims::isotropic(&[16, 16, 16]).unwrap(),
    })
    .unwrap();
    let (report, _) = ndv(&field, None).unwrap();
    assert_eq!(report.measure_voxel, 0.0);
    assert_eq!(report.any_nonpositive_count, 0);
}
