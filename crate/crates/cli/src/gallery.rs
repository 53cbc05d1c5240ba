//! Bundled scenario configs, one per figure regime.

pub struct Entry {
    pub name: &'static str,
    pub text: &'static str,
}

macro_rules! entry {
    ($name:literal) => {
        Entry { name: $name, text: include_str!(concat!("../scenarios/", $name, ".toml")) }
    };
}

pub static GALLERY: &[Entry] = &[
    entry!("spontaneous_emission"),
    entry!("fig-CTL-a"),
    entry!("fig-CTL-b"),
    entry!("fig-qt1"),
    entry!("fig-comp2-a"),
    entry!("fig-comp2-b"),
    entry!("fig-comp2-c"),
    entry!("fig-comp2-d"),
    entry!("two_bath_steady"),
    entry!("thermal_ledger"),
];

pub fn find(name: &str) -> Option<&'static Entry> {
    GALLERY.iter().find(|e| e.name == name)
}
