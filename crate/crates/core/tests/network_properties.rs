use proptest::prelude::*;

use dqm_core::network::{
    build_optimal_network, mesh_decompose, mesh_reconstruct, validate_weights, BeamsplitterMesh,
    Scheme,
};
use dqm_core::qfim::{closed_form_variance, global_variance, qfim_assemble, qfim_coefficients};
use dqm_core::states::{moments_of, SingleModeState};
use dqm_core::Complex64;

fn magnitudes() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(prop_oneof![0.05f64..1.0, -1.0f64..-0.05], 1..5)
}

proptest! {
    #[test]
    fn optimal_network_columns_follow_weights(x in magnitudes(), reduced in any::<bool>()) {
        let (raw, scheme) = if reduced {
            (x.clone(), Scheme::Reduced)
        } else {
            (x.iter().flat_map(|v| [*v, -*v]).collect(), Scheme::Paired)
        };
        let w = validate_weights(&raw, scheme).unwrap();
        let net = build_optimal_network(&w).unwrap();
        prop_assert!(net.unitarity_deviation() < 1e-12);
        let u = net.matrix();
        for (j, wj) in w.entries().iter().enumerate() {
            prop_assert!((u[[j, 0]].norm_sqr() - wj.abs()).abs() < 1e-12);
            let v = u[[j, 0]] * u[[j, 1]].conj();
            prop_assert!((v - Complex64::new(*wj, 0.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn mesh_text_roundtrip(x in magnitudes()) {
        let raw: Vec<f64> = x.iter().flat_map(|v| [*v, -*v]).collect();
        let w = validate_weights(&raw, Scheme::Paired).unwrap();
        let net = build_optimal_network(&w).unwrap();
        let mesh = BeamsplitterMesh::from_text(&mesh_decompose(&net).to_text()).unwrap();
        let back = mesh_reconstruct(&mesh, net.modes()).unwrap();
        let dev = net.matrix().iter().zip(back.iter()).fold(0.0f64, |m, (a, b)| m.max((a - b).norm()));
        prop_assert!(dev < 1e-12);
    }

    #[test]
    fn variance_independent_of_weights(x in magnitudes(), r in 0.05f64..1.0, a in 0.2f64..3.0) {
        let m = moments_of(&SingleModeState::squeezed_vacuum(r, 0.0), 0).unwrap();
        let coeffs = qfim_coefficients(&m, Complex64::new(a, 0.0));
        let w = validate_weights(&x, Scheme::Reduced).unwrap();
        let bundle = qfim_assemble(&coeffs, &build_optimal_network(&w).unwrap()).unwrap();
        let v = global_variance(&bundle, &w).unwrap();
        let cf = closed_form_variance(&coeffs);
        prop_assert!((v - cf).abs() <= 1e-10 * cf);
    }
}
