//! Writes a tiny IDX image/label pair, reads it back, and splits it so each
//! device sees a single class.

use efhc::data::{label_partition, load_idx_dataset, write_idx, IdxFile};

fn main() -> efhc::Result<()> {
    let dir = std::env::temp_dir().join("efhc_idx_example");
    std::fs::create_dir_all(&dir).map_err(|e| efhc::Error::Io {
        path: dir.clone(),
        source: e,
    })?;
    let (count, side) = (40, 4);
    let labels: Vec<u8> = (0..count).map(|i| (i % 4) as u8).collect();
    let pixels: Vec<u8> = (0..count * side * side)
        .map(|p| ((p / (side * side)) % 4 * 60 + p % 7) as u8)
        .collect();
    let images = IdxFile::Images {
        count,
        rows: side,
        cols: side,
        pixels,
    };
    write_idx(dir.join("images.idx"), &images)?;
    write_idx(dir.join("labels.idx"), &IdxFile::Labels(labels))?;

    let ds = load_idx_dataset(dir.join("images.idx"), dir.join("labels.idx"), 4)?;
    println!(
        "{} samples, {} features, {} classes",
        ds.len(),
        ds.features(),
        ds.classes()
    );
    let part = label_partition(&ds, 4, 1, 9)?;
    for (i, dev) in part.devices.iter().enumerate() {
        println!(
            "device {i}: {} samples, labels {:?}",
            dev.len(),
            part.label_sets[i]
        );
    }
    Ok(())
}
