//! Property checks for the structural identities the solver and geometry
//! lean on: operator adjoints, quadrature, selection round trips,
//! co-array combinatorics, and cone projections.

use canm::geometry::{cantor_array, IndexSet};
use canm::linalg::{
    fro_inner, hermitian_eig, hermitize, psd_project, toeplitz, toeplitz_adjoint, CMat, CVec,
    C64, TrigPolynomial,
};
use proptest::prelude::*;

fn cvec(n: usize) -> impl Strategy<Value = CVec> {
    prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), n).prop_map(|v| {
        CVec::from_iterator(v.len(), v.into_iter().map(|(re, im)| C64::new(re, im)))
    })
}

fn hermitian(n: usize) -> impl Strategy<Value = CMat> {
    prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), n * n).prop_map(move |v| {
        hermitize(&CMat::from_fn(n, n, |i, j| {
            let (re, im) = v[i * n + j];
            C64::new(re, im)
        }))
    })
}

fn index_set(max_ambient: usize) -> impl Strategy<Value = IndexSet> {
    (2..=max_ambient).prop_flat_map(|n| {
        prop::collection::btree_set(0..n, 1..n).prop_map(move |mut s| {
            s.insert(0);
            IndexSet::new(s.into_iter().collect(), n).expect("indices below ambient")
        })
    })
}

proptest! {
    // Re<T(x), H> = Re(x0) t0 + 2 sum_{j>0} Re(conj(x_j) t_j): the Toeplitz
    // lift and the subdiagonal-sum map are adjoint under the real pairing.
    #[test]
    fn toeplitz_adjoint_pairing(
        (x, h) in (2usize..24).prop_flat_map(|n| (cvec(n), hermitian(n)))
    ) {
        let t = toeplitz_adjoint(&h).unwrap();
        let lhs = fro_inner(&toeplitz(&x), &h).re;
        let mut rhs = x[0].re * t[0].re;
        for j in 1..x.len() {
            rhs += 2.0 * (x[j].conj() * t[j]).re;
        }
        prop_assert!((lhs - rhs).abs() <= 1e-10 * (1.0 + lhs.abs()));
    }

    // The lift is Hermitian with constant diagonals equal to the input;
    // the main diagonal keeps only the real part of the zero lag.
    #[test]
    fn toeplitz_shape(x in (2usize..24).prop_flat_map(cvec)) {
        let n = x.len();
        let t = toeplitz(&x);
        for i in 0..n {
            for j in 0..n {
                let expect = if i == j {
                    C64::new(x[0].re, 0.0)
                } else if i > j {
                    x[i - j]
                } else {
                    x[j - i].conj()
                };
                prop_assert!((t[(i, j)] - expect).norm() <= 1e-15);
            }
        }
    }

    // Uniform grids beyond twice the degree integrate |Q|^2 exactly.
    #[test]
    fn quadrature_parseval(
        (q, extra) in (2usize..24).prop_flat_map(|n| (cvec(n), 0usize..16))
    ) {
        let grid = 2 * q.len() + 1 + extra;
        let mean = TrigPolynomial::new(q.clone())
            .eval_grid(grid)
            .iter()
            .map(|v| v.norm_sqr())
            .sum::<f64>() / grid as f64;
        prop_assert!((mean - q.norm_squared()).abs() <= 1e-10 * (1.0 + mean));
    }

    // Selecting after scattering returns the original block.
    #[test]
    fn select_embed_round_trip(
        (set, h) in index_set(24).prop_flat_map(|s| {
            let m = s.len();
            (Just(s), hermitian(m))
        })
    ) {
        let sel = set.selection();
        let embedded = sel.embed_principal(&h).unwrap();
        let back = sel.gather_principal(&embedded).unwrap();
        prop_assert!((&back - &h).norm() <= 1e-15);
        // scattering puts entries exactly on the selected rows and columns
        for i in 0..set.ambient() {
            for j in 0..set.ambient() {
                if !(set.contains(i) && set.contains(j)) {
                    prop_assert!(embedded[(i, j)].norm() == 0.0);
                }
            }
        }
    }

    #[test]
    fn select_picks_entries((set, x) in index_set(24).prop_flat_map(|s| {
        let n = s.ambient();
        (Just(s), cvec(n))
    })) {
        let picked = set.selection().select(&x).unwrap();
        for (k, &i) in set.indices().iter().enumerate() {
            prop_assert!((picked[k] - x[i]).norm() == 0.0);
        }
    }

    // The co-array always contains 0, tops out at the aperture, and has at
    // least one lag per element when 0 is an element.
    #[test]
    fn difference_set_bounds(set in index_set(48)) {
        let d = set.difference_set();
        prop_assert!(d.contains(0));
        prop_assert_eq!(d.ambient(), set.ambient());
        prop_assert_eq!(d.max(), set.max());
        prop_assert!(d.len() >= set.len());
        for &lag in d.indices() {
            let hit = set
                .indices()
                .iter()
                .any(|&a| set.indices().iter().any(|&b| a >= b && a - b == lag));
            prop_assert!(hit);
        }
    }

    // Projection onto the semidefinite cone is idempotent and lands in the
    // cone; semidefinite inputs pass through unchanged.
    #[test]
    fn psd_projection_idempotent(h in (2usize..16).prop_flat_map(hermitian)) {
        let once = psd_project(&h).unwrap();
        let twice = psd_project(&once).unwrap();
        prop_assert!((&twice - &once).norm() <= 1e-10 * (1.0 + once.norm()));
        let (vals, _) = hermitian_eig(&once).unwrap();
        prop_assert!(vals.iter().all(|&v| v >= -1e-10));
        let gram = &once * &once; // PSD square stays PSD and projects to itself
        let same = psd_project(&gram).unwrap();
        prop_assert!((&same - &gram).norm() <= 1e-9 * (1.0 + gram.norm()));
    }
}

#[test]
fn cantor_arrays_are_self_similar() {
    // Each order is the previous order plus a copy shifted by two thirds
    // of the new aperture, doubling the element count.
    for order in 1..=6u32 {
        let small = cantor_array(order).unwrap();
        let big = cantor_array(order + 1).unwrap();
        assert_eq!(big.len(), 2 * small.len());
        assert_eq!(big.ambient(), 3 * (small.ambient() - 1) + 1);
        let shift = 2 * 3usize.pow(order - 1);
        let mut expected: Vec<usize> = small.indices().to_vec();
        expected.extend(small.indices().iter().map(|&i| i + shift));
        expected.sort_unstable();
        assert_eq!(big.indices(), &expected[..]);
        assert!(big.is_complete());
    }
}
