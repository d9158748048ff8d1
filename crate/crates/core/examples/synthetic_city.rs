//! Writes the inputs of a 400-segment synthetic city and a `run.toml`
//! manifest into the given directory.
//!
//! ```text
//! cargo run --example synthetic_city -- /tmp/city
//! chattymaps assign --manifest /tmp/city/run.toml
//! ```

use chattymaps::synth::{generate_city, write_city_inputs, CityConfig};

fn main() -> std::io::Result<()> {
    let dir = std::env::args().nth(1).unwrap_or_else(|| "city".into());
    let seed = std::env::args().nth(2).and_then(|s| s.parse().ok()).unwrap_or(1);
    let city = generate_city(&CityConfig { seed, ..CityConfig::default() });
    write_city_inputs(&city, dir.as_ref(), seed)?;
    println!("wrote {} segments and {} photos to {dir}", city.segments.len(), city.photos.len());
    Ok(())
}
