use proptest::prelude::*;
use topk_boost::data::{parse_arff_str, read_csv, stream, write_csv, LabelSpec, MultilabelDataset, Split, StreamPlan};
use topk_boost::RelevanceSet;

fn dataset() -> impl Strategy<Value = MultilabelDataset> {
    (1usize..6, 1usize..5, 1usize..20).prop_flat_map(|(dim, m, n)| {
        (
            prop::collection::vec(prop::collection::vec(-1e6f64..1e6, dim), n),
            prop::collection::vec(prop::collection::vec(any::<bool>(), m), n),
        )
            .prop_map(|(x, masks)| {
                let labels = masks.into_iter().map(RelevanceSet::from_mask).collect();
                MultilabelDataset::new("prop", Split::Train, x, labels).unwrap()
            })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn csv_round_trip_is_exact(ds in dataset()) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ds.csv");
        write_csv(&ds, &path).unwrap();
        let back = read_csv(&path).unwrap();
        prop_assert_eq!(back.len(), ds.len());
        prop_assert_eq!((back.m(), back.dim()), (ds.m(), ds.dim()));
        for i in 0..ds.len() {
            prop_assert_eq!(back.features(i), ds.features(i));
            prop_assert_eq!(back.labels(i), ds.labels(i));
        }
    }

    #[test]
    fn every_row_appears_once_per_loop(n in 1usize..40, loops in 1usize..=20, seed in any::<u64>()) {
        let order = StreamPlan::new(loops, true, seed).unwrap().order(n);
        prop_assert_eq!(order.len(), n * loops);
        for pass in order.chunks(n) {
            let mut sorted = pass.to_vec();
            sorted.sort_unstable();
            prop_assert_eq!(sorted, (0..n).collect::<Vec<_>>());
        }
    }
}

#[test]
fn mulan_style_header_and_mixed_rows() {
    let text = "\
% Emotions-like excerpt
@RELATION 'music: -C -3'

@ATTRIBUTE 'Mean_Acc1298_Mean_Mem40_Centroid' NUMERIC
@ATTRIBUTE Std_Acc1298 REAL
@ATTRIBUTE \"happy pleased\" {0,1}
@ATTRIBUTE 'sad lonely' {0,1}
@ATTRIBUTE quiet {0,1}

@DATA
0.034741,0.089665,0,1,1
{0 -0.5,2 1}
% trailing comment
{}
";
    let ds = parse_arff_str(text, &LabelSpec::Count(3), Split::Train).unwrap();
    assert_eq!((ds.len(), ds.dim(), ds.m()), (3, 2, 3));
    assert_eq!(ds.name, "music: -C -3");
    assert_eq!(ds.labels(0).indices(), vec![1, 2]);
    assert_eq!(ds.features(1), &[-0.5, 0.0]);
    assert_eq!(ds.labels(1).indices(), vec![0]);
    assert!(ds.labels(2).is_empty());
    assert_eq!(ds.cardinality(), (0, 1.0, 2));

    let plan = StreamPlan::new(2, false, 0).unwrap();
    let seen: Vec<&[f64]> = stream(&ds, &plan).map(|(x, _)| x).collect();
    assert_eq!(seen.len(), 6);
    assert_eq!(seen[3], ds.features(0));
}
