use lad_core::description::{render, RenderConfig};
use lad_core::encoder::{encode, EncoderParams, Mode, Vocabulary};
use lad_core::eval::{aggregate, auroc, task_report, GridSubset};
use lad_core::negsynth::{synthesize_negative, validate_negative};
use lad_core::scene::{sample_normal, CaptureCondition, ScenarioId, ViolationLabel};
use lad_core::scorer::{score, ReferenceLibrary};
use lad_core::seed;
use proptest::prelude::*;

fn unit_vec(d: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0f64..1.0, d)
        .prop_filter("non-zero", |v| v.iter().map(|x| x * x).sum::<f64>() > 1e-4)
        .prop_map(|v| {
            let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            v.into_iter().map(|x| x / n).collect()
        })
}

fn library(d: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(unit_vec(d), 1..40)
}

fn labelled_scores() -> impl Strategy<Value = (Vec<f64>, Vec<bool>)> {
    prop::collection::vec((0.0f64..1.0, any::<bool>()), 2..80).prop_map(|v| {
        let (mut s, mut n): (Vec<f64>, Vec<bool>) = v.into_iter().unzip();
        n[0] = true;
        n[1] = false;
        // coarse scores so ties occur
        for x in s.iter_mut().step_by(2) {
            *x = (*x * 8.0).round() / 8.0;
        }
        (s, n)
    })
}

fn ids(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("n{i}")).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn auroc_ignores_monotone_transforms((scores, normal) in labelled_scores()) {
        let a = auroc(&scores, &normal).unwrap();
        let squashed: Vec<f64> = scores.iter().map(|s| (3.0 * s).exp() + 1.0).collect();
        prop_assert!((a - auroc(&squashed, &normal).unwrap()).abs() < 1e-12);
        let flipped: Vec<f64> = scores.iter().map(|s| -s).collect();
        prop_assert!((a + auroc(&flipped, &normal).unwrap() - 1.0).abs() < 1e-12);
        prop_assert!((0.0..=1.0).contains(&a));
    }

    #[test]
    fn aggregate_ignores_report_order(aucs in prop::collection::vec(0.5f64..1.0, 6), seed in any::<u64>()) {
        let scen = [ScenarioId::Tools, ScenarioId::Ropes];
        let cond = [CaptureCondition::CableBG, CaptureCondition::BlurryCD, CaptureCondition::WhiteBG];
        let mut reports = Vec::new();
        for (i, (s, c)) in scen.iter().flat_map(|s| cond.iter().map(move |c| (*s, *c))).enumerate() {
            // one anomaly and enough normals to hit the requested AUROC in steps of 1/20
            let wins = (aucs[i] * 20.0).round() as usize;
            let mut scores: Vec<f64> = (0..20).map(|j| if j < wins { 1.0 } else { 0.0 }).collect();
            scores.push(0.5);
            let mut labels = vec![ViolationLabel::Normal; 20];
            labels.push(ViolationLabel::Dual);
            reports.push(task_report(&format!("{s}_{c}"), s, c, &scores, &labels).unwrap());
        }
        let grid = GridSubset::new(&scen, &cond);
        let a = aggregate(&reports, &grid).unwrap();
        let mut rng = seed::rng(seed);
        rand::seq::SliceRandom::shuffle(reports.as_mut_slice(), &mut rng);
        prop_assert_eq!(a, aggregate(&reports, &grid).unwrap());
    }

    #[test]
    fn score_ignores_library_order(lib in library(6), z in unit_vec(6), k in 1usize..8) {
        let a = score(&z, &ReferenceLibrary::new(ids(lib.len()), lib.clone()).unwrap(), k).unwrap();
        let mut rev = lib.clone();
        rev.reverse();
        let b = score(&z, &ReferenceLibrary::new(ids(rev.len()), rev).unwrap(), k).unwrap();
        prop_assert!((a.mean_distance - b.mean_distance).abs() < 1e-12);
        prop_assert!(a.score >= 1.0 / 3.0 && a.score <= 1.0);
    }

    #[test]
    fn adding_a_reference_never_raises_the_distance(lib in library(5), extra in unit_vec(5), z in unit_vec(5)) {
        let k = 3;
        let before = score(&z, &ReferenceLibrary::new(ids(lib.len()), lib.clone()).unwrap(), k).unwrap();
        let mut grown = lib.clone();
        grown.push(extra);
        let after = score(&z, &ReferenceLibrary::new(ids(grown.len()), grown).unwrap(), k).unwrap();
        // only meaningful once the library already holds k vectors
        if lib.len() >= k {
            prop_assert!(after.mean_distance <= before.mean_distance + 1e-12);
        }
    }

    #[test]
    fn encodings_are_unit_norm(seed in any::<u64>(), dim in 2usize..24, scenario in 0usize..10) {
        let id = ScenarioId::ALL[scenario];
        let mut rng = seed::rng(seed);
        let text = render(&sample_normal(id.spec(), &mut rng), &RenderConfig::canonical(), &mut rng).unwrap().text;
        let vocab = Vocabulary::build([text.as_str()]);
        let params = EncoderParams::init(vocab.len(), dim, 0.1, seed).unwrap();
        for mode in [Mode::Deterministic, Mode::Stochastic(&mut rng)] {
            let z = encode(&text, &params, &vocab, mode).unwrap();
            let n = z.iter().map(|x| x * x).sum::<f64>().sqrt();
            prop_assert!((n - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn negatives_always_validate(seed in any::<u64>(), scenario in 0usize..10, cond in 0usize..5) {
        let spec = ScenarioId::ALL[scenario].spec();
        let mut rng = seed::rng(seed);
        let pos = render(&sample_normal(spec, &mut rng), &RenderConfig::for_condition(CaptureCondition::ALL[cond]), &mut rng)
            .unwrap()
            .text;
        let (neg, edits) = synthesize_negative(&pos, spec, &mut rng).unwrap();
        prop_assert!(!edits.is_empty());
        prop_assert_ne!(&neg.text, &pos);
        prop_assert!(validate_negative(&pos, &neg.text, spec).passed());
    }
}
