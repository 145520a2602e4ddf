mod common;

use common::*;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn transfer_matrix_is_bistochastic((ring, n, w, g) in systems(), t in times()) {
        bistochastic(&build(ring, n, w, g), t)?;
    }

    #[test]
    fn transfer_eigenvalues_bounded((ring, n, w, g) in systems(), t in times()) {
        eigenvalues_bounded(&build(ring, n, w, g), t)?;
    }

    #[test]
    fn eigenbasis_flat_and_unitary((ring, n, w, g) in systems(), t in times()) {
        flat_column_and_unitary_basis(&build(ring, n, w, g), t)?;
    }

    #[test]
    fn bessel_squares_sum_to_one(x in bessel_args()) {
        bessel_normalization(x)?;
    }

    #[test]
    fn hopping_masses_symmetric(w in 0.2f64..2.0, g in rates(), t in times()) {
        hopping_parity(w, g, t)?;
    }

    #[test]
    fn stationary_density_even((w, g, x) in stationary_args()) {
        stationary_even(w, g, x)?;
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn distributions_normalized(w in 0.2f64..2.0, g in rates(), t in times()) {
        distribution_normalized(w, g, t)?;
    }
}
