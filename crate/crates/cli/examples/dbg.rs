use openemma_core::evaluation::*;
use openemma_core::scene_data::*;
use std::path::Path;

fn main() {
    let text = std::fs::read_to_string("/tmp/out1/predictions.jsonl").unwrap();
    for line in text.lines() {
        let r: PredictionRecord = serde_json::from_str(line).unwrap();
        if r.failed { continue; }
        let manifest = load_manifest(Path::new(&format!("fixtures/scenes/{}.json", r.scene_id))).unwrap();
        let anchor = first_anchor_index(&manifest, 5).unwrap();
        let gt = ground_truth_future(&manifest, anchor, 5).unwrap();
        let pred = r.trajectory(0.5);
        let s = score_sample(&pred, &gt).unwrap();
        println!("{} l2_1s={:?}", r.scene_id, s.l2_1s);
        // reserialize and rescore
        let line2 = serde_json::to_string(&r).unwrap();
        let r2: PredictionRecord = serde_json::from_str(&line2).unwrap();
        assert_eq!(r.points, r2.points, "json round trip changed points");
    }
}
