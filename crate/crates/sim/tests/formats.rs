use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use uabs_core::env::{gen_random_task, RandomTaskSpec};
use uabs_sim::config::Method;
use uabs_sim::harness::MetricsRow;
use uabs_sim::metrics::{read_metrics, write_metrics, Format, Metadata};
use uabs_sim::trace;

fn row() -> impl Strategy<Value = MetricsRow> {
    (0..3usize, any::<u64>(), 0..500usize, any::<f64>(), 0.0..1e6f64).prop_filter_map(
        "finite",
        |(m, seed, task_index, mean, std)| {
            mean.is_finite().then(|| MetricsRow {
                method: Method::ALL[m],
                seed,
                task_index,
                mean_packets: mean,
                std_packets: std,
            })
        },
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn metrics_round_trip_bit_exact(rows in prop::collection::vec(row(), 1..20), json in any::<bool>()) {
        let format = if json { Format::Json } else { Format::Csv };
        let mut meta = Metadata::default();
        meta.push("config_hash", "00");
        let mut buf = Vec::new();
        write_metrics(&rows, &meta, format, &mut buf).unwrap();
        let (_, back) = read_metrics(buf.as_slice()).unwrap();
        prop_assert_eq!(back.len(), rows.len());
        for (a, b) in back.iter().zip(&rows) {
            prop_assert_eq!(a.mean_packets.to_bits(), b.mean_packets.to_bits());
            prop_assert_eq!(a.std_packets.to_bits(), b.std_packets.to_bits());
            prop_assert_eq!((a.method, a.seed, a.task_index), (b.method, b.seed, b.task_index));
        }
    }

    #[test]
    fn generated_task_replays_from_trace(seed in any::<u64>()) {
        let task = gen_random_task(&RandomTaskSpec::urban(), &mut ChaCha8Rng::seed_from_u64(seed));
        let mut buf = Vec::new();
        trace::write_trace(&task, &mut buf).unwrap();
        let tracks = trace::read_tracks(buf.as_slice(), &task.area).unwrap();
        prop_assert_eq!(tracks.len(), task.traffic.gue_count());
        for (g, track) in tracks.iter().enumerate() {
            for t in 0..=task.horizon + 1 {
                prop_assert_eq!(track.position(t, task.horizon), task.traffic.gue_position(g, t, task.horizon));
            }
        }
    }
}
