//! Property tests over the pure building blocks.

use ndarray::Array2;
use proptest::prelude::*;
use rexnet::audio_io::Emotion;
use rexnet::counterfactual::similarity_from_mse;
use rexnet::evalsuite::{ablate, macro_accuracy, top_k_bins, Fraction};
use rexnet::relations::{decode_relations, encode_relations, nnrank_decode, welch_p_value, Relation};
use rexnet::saliency::{min_max_normalize, pairwise_contrastive, total_contrastive, SaliencyMap};

const BINS: usize = 4;
const FRAMES: usize = 6;

fn map(class: Emotion) -> impl Strategy<Value = SaliencyMap> {
    prop::collection::vec(0.0f64..=1.0, BINS * FRAMES).prop_map(move |v| {
        SaliencyMap::new(Array2::from_shape_vec((BINS, FRAMES), v).unwrap(), class).unwrap()
    })
}

fn relation() -> impl Strategy<Value = Relation> {
    prop::sample::select(Relation::ALL.to_vec())
}

proptest! {
    #[test]
    fn contrastive_maps_stay_below_class_map(
        s_y in map(Emotion::Angry),
        others in prop::collection::vec(map(Emotion::Sad), 1..8),
    ) {
        let pair = pairwise_contrastive(&s_y, &others[0]).unwrap();
        let total = total_contrastive(&s_y, &others).unwrap();
        for ((y, p), t) in s_y.values().iter().zip(pair.values()).zip(total.values()) {
            prop_assert!(*p >= 0.0 && *p <= *y + 1e-12);
            prop_assert!(*t >= 0.0 && *t <= *y + 1e-12);
        }
    }

    #[test]
    fn total_over_one_class_is_pairwise(s_y in map(Emotion::Happy), g in map(Emotion::Fearful)) {
        let pair = pairwise_contrastive(&s_y, &g).unwrap();
        let total = total_contrastive(&s_y, std::slice::from_ref(&g)).unwrap();
        for (a, b) in pair.values().iter().zip(total.values()) {
            prop_assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn self_contrast_is_s_times_one_minus_s(s in map(Emotion::Calm)) {
        let c = pairwise_contrastive(&s, &s).unwrap();
        for (v, x) in c.values().iter().zip(s.values()) {
            prop_assert!((v - x * (1.0 - x)).abs() < 1e-12);
            prop_assert!(*v <= 0.25 + 1e-12);
        }
    }

    #[test]
    fn min_max_lands_in_unit_interval(mut v in prop::collection::vec(-1e3f64..1e3, 1..64)) {
        let argmax = v.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap().0;
        let constant = v.iter().all(|x| *x == v[0]);
        min_max_normalize(&mut v);
        prop_assert!(v.iter().all(|x| (0.0..=1.0).contains(x)));
        if !constant {
            prop_assert_eq!(v[argmax], 1.0);
            prop_assert!(v.iter().any(|x| *x == 0.0));
        }
    }

    #[test]
    fn relation_encoding_round_trips(r in prop::array::uniform6(relation())) {
        prop_assert_eq!(decode_relations(&encode_relations(&r)), r);
    }

    #[test]
    fn decoding_is_monotone_in_both_bits(a in 0.0f64..=1.0, b in 0.0f64..=1.0, da in 0.0f64..=1.0, db in 0.0f64..=1.0) {
        let lo = nnrank_decode([a, b]);
        let hi = nnrank_decode([(a + da).min(1.0), (b + db).min(1.0)]);
        prop_assert!(hi.index() >= lo.index());
    }

    #[test]
    fn welch_is_symmetric_and_bounded(
        a in prop::collection::vec(-10.0f64..10.0, 2..20),
        b in prop::collection::vec(-10.0f64..10.0, 2..20),
    ) {
        let p = welch_p_value(&a, &b).unwrap();
        let q = welch_p_value(&b, &a).unwrap();
        prop_assert!((0.0..=1.0).contains(&p));
        prop_assert!((p - q).abs() < 1e-12);
    }

    #[test]
    fn macro_accuracy_is_a_mean_of_supported_classes(
        counts in prop::collection::vec((0usize..20, 0usize..20), 1..9),
    ) {
        let fr: Vec<Fraction> = counts.iter().map(|&(h, extra)| Fraction::new(h, h + extra)).collect();
        let m = macro_accuracy(&fr);
        let vals: Vec<f64> = fr.iter().filter(|f| f.denominator > 0).map(|f| f.value()).collect();
        prop_assert!((0.0..=1.0).contains(&m));
        if !vals.is_empty() {
            let lo = vals.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            prop_assert!(m >= lo - 1e-12 && m <= hi + 1e-12);
        }
    }

    #[test]
    fn top_k_picks_the_largest_bins(v in prop::collection::vec(-5.0f64..5.0, BINS * FRAMES), k in 0usize..=BINS * FRAMES) {
        let a = Array2::from_shape_vec((BINS, FRAMES), v.clone()).unwrap();
        let top = top_k_bins(&a, k);
        prop_assert_eq!(top.len(), k);
        let floor = top.iter().map(|&i| v[i]).fold(f64::INFINITY, f64::min);
        let rest_max = (0..v.len()).filter(|i| !top.contains(i)).map(|i| v[i]).fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(k == 0 || floor >= rest_max);
        let ablated = ablate(&a, &top);
        for (i, (x, y)) in a.iter().zip(ablated.iter()).enumerate() {
            prop_assert_eq!(*y, if top.contains(&i) { 0.0 } else { *x });
        }
    }

    #[test]
    fn similarity_decreases_with_error(m in 0.0f64..50.0, d in 1e-6f64..10.0) {
        let s = similarity_from_mse(m);
        prop_assert!(s > 0.0 && s <= 1.0);
        prop_assert!(similarity_from_mse(m + d) < s);
    }
}
