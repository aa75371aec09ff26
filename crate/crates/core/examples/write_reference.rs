//! Regenerates the reference scenario fixture.

use hrsf_core::reference::reference_scenario;

fn main() -> std::io::Result<()> {
    let path = std::env::args().nth(1).unwrap_or_else(|| "crates/core/fixtures/reference_scenario.json".into());
    let mut text = reference_scenario().to_json_pretty();
    text.push('\n');
    std::fs::write(&path, text)?;
    println!("wrote {path}");
    Ok(())
}
