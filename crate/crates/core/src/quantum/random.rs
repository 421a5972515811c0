//! Haar-ish random instances for property suites. Gaussian vectors, Gram-Schmidt.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;

use super::linalg::{inner, norm_sqr, Matrix, C64};
use super::{ProjectiveMeasurement, PureState, UnitaryOp};

pub fn basis_labels(dim: usize) -> Vec<String> {
    (0..dim).map(|i| format!("e{i}")).collect()
}

fn gaussian_vector<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Vec<C64> {
    (0..dim)
        .map(|_| C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
        .collect()
}

/// Uniformly random unit vector over labels `e0, e1, ...`.
pub fn random_state<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> PureState {
    loop {
        let v = gaussian_vector(dim, rng);
        if norm_sqr(&v) > 1e-6 {
            return PureState::normalize(basis_labels(dim), v).expect("nonzero vector");
        }
    }
}

/// `dim` orthonormal vectors.
pub fn random_orthonormal_basis<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Vec<Vec<C64>> {
    let mut basis: Vec<Vec<C64>> = Vec::with_capacity(dim);
    while basis.len() < dim {
        let mut v = gaussian_vector(dim, rng);
        for b in &basis {
            let c = inner(b, &v);
            for (vi, bi) in v.iter_mut().zip(b) {
                *vi -= c * bi;
            }
        }
        let n = norm_sqr(&v).sqrt();
        if n > 1e-3 {
            basis.push(v.into_iter().map(|x| x / n).collect());
        }
    }
    basis
}

pub fn random_unitary<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> UnitaryOp {
    let cols = random_orthonormal_basis(dim, rng);
    let mut m = Matrix::zeros(dim);
    for (j, col) in cols.iter().enumerate() {
        for (i, &x) in col.iter().enumerate() {
            m.set(i, j, x);
        }
    }
    UnitaryOp::new(m).expect("orthonormal columns")
}

/// Nondegenerate measurement in a random basis, outcomes `q0, q1, ...`.
pub fn random_basis_pvm<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> ProjectiveMeasurement {
    random_pvm_with_blocks(dim, dim, rng)
}

/// Random measurement with `outcomes` outcomes (1 ≤ outcomes ≤ dim): a random
/// basis split into `outcomes` nonempty groups, each group spanning one projector.
pub fn random_pvm_with_blocks<R: Rng + ?Sized>(dim: usize, outcomes: usize, rng: &mut R) -> ProjectiveMeasurement {
    assert!(outcomes >= 1 && outcomes <= dim);
    let basis = random_orthonormal_basis(dim, rng);
    let mut owner: Vec<usize> = (0..dim).map(|i| i.min(outcomes - 1)).collect();
    // every group gets at least one vector; the rest are spread randomly
    for o in owner.iter_mut().skip(outcomes) {
        *o = rng.random_range(0..outcomes);
    }
    owner.shuffle(rng);
    let projectors = (0..outcomes)
        .map(|g| {
            let mut p = Matrix::zeros(dim);
            for (v, _) in basis.iter().zip(&owner).filter(|(_, &o)| o == g) {
                p = &p + &Matrix::outer(v, v);
            }
            (format!("q{g}"), p)
        })
        .collect();
    ProjectiveMeasurement::new(projectors).expect("partition of an orthonormal basis")
}

/// Random measurement with a random number of outcomes between 2 and `dim`.
pub fn random_pvm<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> ProjectiveMeasurement {
    let outcomes = rng.random_range(2.min(dim)..=dim);
    random_pvm_with_blocks(dim, outcomes, rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn generated_objects_are_valid() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for dim in 1..=4 {
            let s = random_state(dim, &mut rng);
            assert!((s.norm() - 1.0).abs() < 1e-12);
            let u = random_unitary(dim, &mut rng);
            assert_eq!(u.dim(), dim);
            let p = random_pvm(dim, &mut rng);
            assert!(!p.is_empty() && p.len() <= dim);
            assert!(random_basis_pvm(dim, &mut rng).is_nondegenerate());
        }
    }
}
