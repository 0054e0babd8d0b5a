//! Every example under `examples/` must run to completion.

macro_rules! example_test {
    ($module:ident, $file:literal) => {
        mod $module {
            include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/", $file));

            #[test]
            fn runs() {
                run_example().expect(concat!($file, " should run"));
            }
        }
    };
}

example_test!(iou_geometry, "iou_geometry.rs");
example_test!(nms_modes, "nms_modes.rs");
example_test!(voting_strategies, "voting_strategies.rs");
example_test!(evaluate_map, "evaluate_map.rs");
example_test!(dataset_split_stats, "dataset_split_stats.rs");
example_test!(benchmark_table, "benchmark_table.rs");
example_test!(synthetic_pipeline, "synthetic_pipeline.rs");
