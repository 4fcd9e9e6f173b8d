//! Loads each sensor preset, applies an override and prints the config
//! hash that run headers carry.

use poleloc::config::{preset_names, Config};
use std::path::Path;

fn main() -> poleloc::Result<()> {
    for name in preset_names() {
        let cfg = Config::preset(name)?;
        println!("{name:7} {}x{} beams, hash {}", cfg.sensor.width, cfg.sensor.height, &cfg.hash()[..12]);
    }
    let cfg = Config::from_toml("preset = \"hdl32\"\n[mcl]\nparticles = 500\n", Path::new("inline.toml"))?;
    print!("{}", cfg.header());
    Ok(())
}
