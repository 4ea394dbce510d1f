use crate::config::{Command, ConfigError, Settings};

/// Values used when neither a preset nor the user sets a key.
pub const BASE: &[(&str, &str)] = &[
    ("omega_r", "1"),
    ("delta_policy", "fixed:0"),
    ("g_min", "0"),
    ("g_max", "0.1"),
    ("g_steps", "11"),
    ("cutoff_policy", "factor_of_g:10"),
    ("fock", "auto"),
    ("levels", "4"),
    ("x", "g"),
    ("g", "0.1"),
    ("delta_min", "0.2"),
    ("delta_max", "1"),
    ("delta_steps", "17"),
    ("variant", "rwa"),
    ("t_max", "auto"),
    ("t_steps", "101"),
    ("allow_flagged", "false"),
];

pub struct Preset {
    pub name: &'static str,
    pub command: Command,
    pub settings: &'static [(&'static str, &'static str)],
}

pub const PRESETS: &[Preset] = &[
    Preset {
        name: "fig1",
        command: Command::Cutoff,
        settings: &[
            ("delta_policy", "fixed:0.01"),
            ("cutoff_policy", "factor_of_g:10"),
            ("g_min", "0"),
            ("g_max", "0.1"),
            ("g_steps", "101"),
        ],
    },
    Preset {
        name: "fig2",
        command: Command::Spectrum,
        settings: &[
            ("delta_policy", "fixed:0"),
            ("cutoff_policy", "factor_of_g:10"),
            ("g_min", "0"),
            ("g_max", "0.3"),
            ("g_steps", "61"),
            ("levels", "6"),
        ],
    },
    Preset {
        name: "fig3a",
        command: Command::Dispersive,
        settings: &[
            ("x", "g"),
            ("delta_policy", "factor:10"),
            ("cutoff_policy", "factor_of_detuning:10"),
            ("g_min", "0.005"),
            ("g_max", "0.1"),
            ("g_steps", "20"),
        ],
    },
    Preset {
        name: "fig3b",
        command: Command::Dispersive,
        settings: &[
            ("x", "g"),
            ("delta_policy", "factor:-10"),
            ("cutoff_policy", "factor_of_detuning:10"),
            ("g_min", "0.005"),
            ("g_max", "0.1"),
            ("g_steps", "20"),
        ],
    },
    Preset {
        name: "fig4a",
        command: Command::Dispersive,
        settings: &[
            ("x", "delta"),
            ("g", "0.1"),
            ("cutoff_policy", "factor_of_detuning:10"),
            ("delta_min", "0.2"),
            ("delta_max", "1.0"),
            ("delta_steps", "17"),
        ],
    },
    Preset {
        name: "fig4b",
        command: Command::Dispersive,
        settings: &[
            ("x", "delta"),
            ("g", "0.1"),
            ("cutoff_policy", "factor_of_detuning:10"),
            ("delta_min", "-1.0"),
            ("delta_max", "-0.2"),
            ("delta_steps", "17"),
        ],
    },
    Preset {
        name: "fig5a",
        command: Command::Twoqubit,
        settings: &[
            ("delta_policy", "factor:10"),
            ("cutoff_policy", "factor_of_detuning:10"),
            ("g_min", "0.001"),
            ("g_max", "0.1"),
            ("g_steps", "100"),
        ],
    },
    Preset {
        name: "fig5b",
        command: Command::Twoqubit,
        settings: &[
            ("delta_policy", "factor:-10"),
            ("cutoff_policy", "factor_of_detuning:10"),
            ("g_min", "0.001"),
            ("g_max", "0.1"),
            ("g_steps", "100"),
        ],
    },
    Preset {
        name: "sqrt-iswap",
        command: Command::Evolve,
        settings: &[
            ("g", "0.02"),
            ("delta_policy", "fixed:0.2"),
            ("cutoff_policy", "factor_of_detuning:10"),
            ("variant", "rwa"),
            ("t_max", "auto"),
            ("t_steps", "101"),
        ],
    },
];

pub fn find(name: &str) -> Result<&'static Preset, ConfigError> {
    PRESETS
        .iter()
        .find(|p| p.name == name)
        .ok_or_else(|| ConfigError::UnknownPreset(name.to_string()))
}

/// Preset used when none is named on the command line.
pub fn default_for(command: Command) -> &'static Preset {
    let name = match command {
        Command::Cutoff => "fig1",
        Command::Spectrum => "fig2",
        Command::Dispersive => "fig3a",
        Command::Twoqubit => "fig5a",
        Command::Evolve => "sqrt-iswap",
    };
    find(name).expect("built-in preset")
}

/// Base values overlaid with the preset for `command`.
pub fn layered(command: Command, preset: Option<&str>) -> Result<Settings, ConfigError> {
    let preset = match preset {
        Some(name) => find(name)?,
        None => default_for(command),
    };
    if preset.command != command {
        return Err(ConfigError::PresetMismatch {
            preset: preset.name.to_string(),
            expected: preset.command.name(),
        });
    }
    let mut s = Settings::from_pairs(BASE)?;
    s.merge(&Settings::from_pairs(preset.settings)?);
    Ok(s)
}
