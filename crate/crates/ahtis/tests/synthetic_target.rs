//! Spectrum checks on the synthetic target construction, using a Jacobi
//! eigensolver as the independent oracle.

use ahtis::targets::{make_synthetic_target, SyntheticTargetSpec};

/// Jacobi eigenvalue iteration for small dense symmetric matrices.
fn jacobi_eigenvalues(mut a: Vec<f64>, d: usize) -> Vec<f64> {
    for _sweep in 0..100 {
        let mut off = 0.0;
        for i in 0..d {
            for j in (i + 1)..d {
                off += a[i * d + j] * a[i * d + j];
            }
        }
        if off < 1e-24 {
            break;
        }
        for p in 0..d {
            for q in (p + 1)..d {
                let apq = a[p * d + q];
                if apq.abs() < 1e-30 {
                    continue;
                }
                let app = a[p * d + p];
                let aqq = a[q * d + q];
                let theta = 0.5 * (aqq - app) / apq;
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..d {
                    let akp = a[k * d + p];
                    let akq = a[k * d + q];
                    a[k * d + p] = c * akp - s * akq;
                    a[k * d + q] = s * akp + c * akq;
                }
                for k in 0..d {
                    let apk = a[p * d + k];
                    let aqk = a[q * d + k];
                    a[p * d + k] = c * apk - s * aqk;
                    a[q * d + k] = s * apk + c * aqk;
                }
            }
        }
    }
    (0..d).map(|i| a[i * d + i]).collect()
}

#[test]
fn condition_number_matches_kappa() {
    for (dim, kappa) in [(2usize, 5.0f64), (4, 5.0), (8, 5.0), (3, 12.0)] {
        let spec = SyntheticTargetSpec {
            dim,
            nu_pi: 2.0,
            kappa,
            location_seed: 101,
            basis_seed: 202,
        };
        let (params, _) = make_synthetic_target(&spec).unwrap();
        let mut eigs = jacobi_eigenvalues(params.sigma().reconstruct(), dim);
        eigs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let cond = eigs[dim - 1] / eigs[0];
        assert!(
            (cond - kappa).abs() <= 1e-8 * kappa,
            "d={dim}: condition number {cond} vs {kappa}"
        );
        assert!(eigs[0] > 0.0);
    }
}

#[test]
fn eigenvalue_ratio_d2_example() {
    let spec = SyntheticTargetSpec {
        dim: 2,
        nu_pi: 2.0,
        kappa: 5.0,
        location_seed: 1,
        basis_seed: 2,
    };
    let (params, _) = make_synthetic_target(&spec).unwrap();
    let mut eigs = jacobi_eigenvalues(params.sigma().reconstruct(), 2);
    eigs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    assert!((eigs[1] / eigs[0] - 5.0).abs() < 1e-10);
}

#[test]
fn log_normalizer_agrees_with_direct_formula() {
    let spec = SyntheticTargetSpec {
        dim: 3,
        nu_pi: 5.0,
        kappa: 5.0,
        location_seed: 7,
        basis_seed: 8,
    };
    let (params, log_z) = make_synthetic_target(&spec).unwrap();
    assert_eq!(log_z, params.log_norm_const());
}
