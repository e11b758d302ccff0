//! The shipped modified IEEE 30-bus dataset with three VPPs.

use crate::models::VppPortfolio;
use crate::scenario::{ScenarioError, SystemScenario};

const FILES: [(&str, &str); 6] = [
    ("ieee30.toml", include_str!("../../data/ieee30.toml")),
    ("ieee30_load.csv", include_str!("../../data/ieee30_load.csv")),
    ("ieee30_reg.csv", include_str!("../../data/ieee30_reg.csv")),
    ("vpp1.toml", include_str!("../../data/vpp1.toml")),
    ("vpp2.toml", include_str!("../../data/vpp2.toml")),
    ("vpp3.toml", include_str!("../../data/vpp3.toml")),
];

/// File names of the bundled VPP portfolios.
pub const BUNDLED_VPPS: [&str; 3] = ["vpp1.toml", "vpp2.toml", "vpp3.toml"];

fn file(name: &str) -> Result<String, ScenarioError> {
    FILES
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, text)| text.to_string())
        .ok_or_else(|| ScenarioError::Io {
            path: name.to_string(),
            source: std::io::Error::new(std::io::ErrorKind::NotFound, "not part of the bundled dataset"),
        })
}

pub fn bundled_scenario() -> SystemScenario {
    SystemScenario::parse(&file("ieee30.toml").expect("bundled"), &file).expect("bundled scenario parses")
}

/// Raw text of a bundled file, for writing the dataset out.
pub fn bundled_file(name: &str) -> Option<&'static str> {
    FILES.iter().find(|(n, _)| *n == name).map(|(_, t)| *t)
}

pub fn bundled_portfolio(name: &str) -> Result<VppPortfolio, ScenarioError> {
    toml::from_str(&file(name)?).map_err(|e| ScenarioError::Parse {
        file: name.to_string(),
        message: e.to_string(),
    })
}
