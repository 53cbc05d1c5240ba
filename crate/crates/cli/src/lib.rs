//! Command line front end of the collide toolkit: scenario configs, engines
//! and CSV/manifest output.

pub mod config;
pub mod gallery;
pub mod output;
pub mod scenarios;

pub use config::{parse_config, ConfigError, Family, ScenarioConfig, Violation};
pub use output::SeedSource;
pub use scenarios::{RunContext, RunOutput};

pub const SEED_ENV: &str = "COLLIDE_SEED";

/// Seed precedence: flag, then `COLLIDE_SEED`, then the config, then 0.
pub fn resolve_seed(flag: Option<u64>, env: Option<&str>, config: Option<u64>) -> Result<(u64, SeedSource), String> {
    if let Some(s) = flag {
        return Ok((s, SeedSource::Flag));
    }
    if let Some(text) = env {
        return text
            .trim()
            .parse()
            .map(|s| (s, SeedSource::Environment))
            .map_err(|_| format!("{SEED_ENV}: '{text}' is not an unsigned 64-bit integer"));
    }
    Ok(config.map_or((0, SeedSource::Default), |s| (s, SeedSource::Config)))
}

/// Config text for a bundled gallery entry or, failing that, the defaults of a scenario.
pub fn builtin_config(name: &str) -> Option<String> {
    gallery::find(name)
        .map(|e| e.text.to_string())
        .or_else(|| scenarios::find(name).map(|s| format!("scenario = \"{}\"\n", s.name)))
}

/// Names accepted by `--scenario`.
pub fn builtin_names() -> Vec<&'static str> {
    let mut names: Vec<&'static str> = gallery::GALLERY.iter().map(|e| e.name).collect();
    for s in scenarios::SCENARIOS {
        if !names.contains(&s.name) {
            names.push(s.name);
        }
    }
    names
}

/// Checks that a config belongs to the subcommand running it.
pub fn check_family(config: &ScenarioConfig, family: Family) -> Result<(), Violation> {
    if config.def.family == family {
        Ok(())
    } else {
        Err(Violation::new(
            "scenario",
            format!(
                "'{}' is a {} scenario; run it with `collide {}`",
                config.def.name,
                config.def.family,
                config.def.family.command()
            ),
        ))
    }
}

/// Overrides the trajectory count of a trajectory scenario.
pub fn set_n_traj(config: &mut ScenarioConfig, n: usize) -> Result<(), Violation> {
    if !config.def.numerics.iter().any(|(k, _)| *k == "n_traj") {
        return Err(Violation::new("--n-traj", format!("not used by scenario '{}'", config.def.name)));
    }
    if n < 2 {
        return Err(Violation::new("--n-traj", "must be an integer >= 2"));
    }
    config.numerics.insert("n_traj", n as f64);
    Ok(())
}
