use pronk_learn::Checkpoint;
use proptest::prelude::*;

proptest! {
    #[test]
    fn checkpoint_text_round_trips_bit_exactly(
        a in prop::collection::vec(any::<f64>().prop_filter("finite", |v| v.is_finite()), 0..40),
        b in prop::collection::vec(-1e-300f64..1e300, 1..12),
        s in any::<f64>().prop_filter("finite", |v| v.is_finite()),
    ) {
        let mut ckpt = Checkpoint::default();
        ckpt.insert_vec("weights", a.clone());
        ckpt.insert("grid", 1, b.len(), b.clone());
        ckpt.insert_scalar("step", s);
        let back = Checkpoint::parse(&ckpt.to_text()).unwrap();
        let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        prop_assert_eq!(bits(back.get("weights").unwrap()), bits(&a));
        prop_assert_eq!(bits(back.get("grid").unwrap()), bits(&b));
        prop_assert_eq!(back.scalar("step").unwrap().to_bits(), s.to_bits());
        prop_assert_eq!(back.to_text(), ckpt.to_text());
    }
}
