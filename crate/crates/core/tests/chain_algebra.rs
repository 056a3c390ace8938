use cayley_lp::chains::Chain0;
use cayley_lp::group::Group;
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_chain(group: &Group, rng: &mut ChaCha8Rng, terms: usize) -> Chain0 {
    Chain0::from_terms((0..terms).map(|_| {
        let n = rng.gen_range(0..8);
        let g = group.random_element(rng, n);
        let c = BigRational::new(BigInt::from(rng.gen_range(-20i64..=20)), BigInt::from(rng.gen_range(1i64..=9)));
        (g, c)
    }))
}

proptest! {
    #[test]
    fn translation_is_an_isometry(seed in any::<u64>(), terms in 0usize..12, p in 1.0f64..8.0) {
        let group = Group::free_product_cyclic(&[2, 3], 1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = random_chain(&group, &mut rng, terms);
        let n = rng.gen_range(0..10);
        let g = group.random_element(&mut rng, n);
        let y = x.translate(&group, &g).unwrap();
        prop_assert_eq!(y.norm_1(), x.norm_1());
        prop_assert_eq!(y.coefficient_sum(), x.coefficient_sum());
        let (a, b) = (x.norm_p(p).unwrap(), y.norm_p(p).unwrap());
        prop_assert!((a - b).abs() <= 1e-12 * a.max(1.0));
        let back = y.translate(&group, &group.invert(&g).unwrap()).unwrap();
        prop_assert_eq!(back, x);
    }

    #[test]
    fn norms_decrease_in_p(seed in any::<u64>(), terms in 0usize..12, p in 1.0f64..6.0, dq in 0.0f64..6.0) {
        let group = Group::free(2, 1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = random_chain(&group, &mut rng, terms);
        let q = p + dq;
        let (np, nq) = (x.norm_p(p).unwrap(), x.norm_p(q).unwrap());
        prop_assert!(nq <= np * (1.0 + 1e-12));
        prop_assert!(np <= x.norm_1().to_f64().unwrap() * (1.0 + 1e-12));
    }

    #[test]
    fn addition_is_exact(seed in any::<u64>(), t1 in 0usize..10, t2 in 0usize..10) {
        let group = Group::free(2, 1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = random_chain(&group, &mut rng, t1);
        let y = random_chain(&group, &mut rng, t2);
        let s = x.add(&y);
        prop_assert_eq!(s.coefficient_sum(), x.coefficient_sum() + y.coefficient_sum());
        prop_assert!(s.sub(&y).sub(&x).is_zero());
        prop_assert!(s.entries().iter().all(|(_, c)| !c.is_zero()));
        let third = BigRational::new(BigInt::from(1), BigInt::from(3));
        prop_assert_eq!(x.scale(&third).coefficient_sum(), x.coefficient_sum() * &third);
    }
}

#[test]
fn point_masses() {
    let group = Group::free(2, 1).unwrap();
    let a = group.parse("a").unwrap();
    let b = group.parse("b").unwrap();
    let d = Chain0::point(a.clone()).sub(&Chain0::point(b));
    assert_eq!(d.len(), 2);
    for p in [1.0, 2.0, 3.5, 10.0] {
        assert!((d.norm_p(p).unwrap() - 2f64.powf(1.0 / p)).abs() < 1e-12);
    }
    assert_eq!(Chain0::point(a.clone()).support().collect::<Vec<_>>(), vec![&a]);
}
