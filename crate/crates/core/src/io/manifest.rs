//! Human-readable run manifest.

use std::fmt::Write;
use std::path::Path;

use crate::error::Result;

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Manifest {
    pub command: String,
    pub status: String,
    pub wall_clock_s: f64,
    pub config_echo: String,
    pub checks: Vec<Check>,
    pub notes: Vec<String>,
}

impl Manifest {
    pub fn new(command: &str, config_echo: String) -> Self {
        Manifest { command: command.into(), status: "running".into(), config_echo, ..Default::default() }
    }

    pub fn check(&mut self, name: &str, pass: bool, detail: impl Into<String>) {
        self.checks.push(Check { name: name.into(), pass, detail: detail.into() });
    }

    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "nsch {}", env!("CARGO_PKG_VERSION"));
        let _ = writeln!(s, "command: {}", self.command);
        let _ = writeln!(s, "platform: {}-{}", std::env::consts::ARCH, std::env::consts::OS);
        let _ = writeln!(s, "status: {}", self.status);
        let _ = writeln!(s, "wall_clock_s: {:.3}", self.wall_clock_s);
        let _ = writeln!(s, "\n[checks]");
        for c in &self.checks {
            let _ = writeln!(s, "{} {}: {}", if c.pass { "PASS" } else { "FAIL" }, c.name, c.detail);
        }
        if !self.notes.is_empty() {
            let _ = writeln!(s, "\n[notes]");
            for n in &self.notes {
                let _ = writeln!(s, "{n}");
            }
        }
        let _ = writeln!(s, "\n[config]");
        s.push_str(&self.config_echo);
        s
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        Ok(super::write_atomic(path, self.render().as_bytes())?)
    }
}
