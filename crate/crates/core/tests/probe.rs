#[test]
fn probe_norming() {
    use matorder::base::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;
    use num_complex::ComplexFloat;
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for space in [
        BaseSpace::lattice(PExp::ONE, 3),
        BaseSpace::lattice(PExp::TWO, 3),
        BaseSpace::lattice(PExp::INF, 3),
        BaseSpace::schatten(PExp::ONE, 2),
        BaseSpace::schatten(PExp::TWO, 2),
        BaseSpace::schatten(PExp::INF, 2),
    ] {
        let mut worst_dn = 0.0f64; let mut worst_pair = 0.0f64;
        for _ in 0..25 {
            let v = space.random_vector(&mut rng);
            let f = space.norming_functional(&v).unwrap();
            let dn = space.dual_norm(&f).unwrap();
            let norm = space.base_norm(&v).unwrap();
            let p = pair(&f, &v);
            worst_dn = worst_dn.max(dn - 1.0);
            worst_pair = worst_pair.max((p.re() - norm).abs() / norm).max(p.im().abs());
        }
        println!("{:?}: dual_norm excess {:.2e}, pair rel err {:.2e}", space, worst_dn, worst_pair);
    }
}
