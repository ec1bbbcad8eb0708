//! Key geometry of a standard 88-key keyboard and point lookup.

use sr3t::piano::{KeyboardLayout, LayoutConfig};

fn main() -> sr3t::Result<()> {
    let layout = KeyboardLayout::new(LayoutConfig::default())?;
    println!("{} keys: {} white, {} black", layout.keys().len(), layout.n_white(), layout.n_black());
    println!("span {:.1} .. {:.1} mm", layout.left_edge(), layout.right_edge());

    for index in 36..=44 {
        let key = layout.key(index).expect("key exists");
        let (lo, hi) = layout.extent(key);
        println!("{:>3} {:<4} {:?}  centre {:7.2}  [{lo:7.2}, {hi:7.2}]", key.index, key.note_name(), key.color, key.center_x);
    }

    // Front of the keyboard only reaches white keys; further back the black
    // keys take over between their edges.
    for (x, depth) in [(563.0, 10.0), (563.0, 80.0), (600.0, 80.0), (-5.0, 10.0)] {
        let hit = layout.key_at(x, depth).map(|k| k.note_name()).unwrap_or_else(|| "-".into());
        println!("x {x:6.1} depth {depth:5.1} -> {hit}");
    }
    Ok(())
}
