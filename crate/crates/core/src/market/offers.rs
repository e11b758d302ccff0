use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::scenario::SystemScenario;

/// Offer prices indexed `[period][unit]`. Energy in $/MWh, inertia in
/// $/(MW·s/Hz) and droop in $/(MW/Hz), each per hour of provision.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OfferBook {
    pub sg_energy: Vec<Vec<f64>>,
    pub reg_energy: Vec<Vec<f64>>,
    pub reg_inertia: Vec<Vec<f64>>,
    pub reg_droop: Vec<Vec<f64>>,
    pub ess_energy: Vec<Vec<f64>>,
    pub ess_inertia: Vec<Vec<f64>>,
    pub ess_droop: Vec<Vec<f64>>,
    /// Small-SG energy of each VPP.
    pub vpp_energy_sg: Vec<Vec<f64>>,
    /// Energy of the other VPP resources.
    pub vpp_energy_other: Vec<Vec<f64>>,
    /// Delayed VPP inertia.
    pub vpp_inertia: Vec<Vec<f64>>,
    pub vpp_droop: Vec<Vec<f64>>,
}

impl OfferBook {
    /// Draws every price uniformly from the scenario ranges. The seed of the
    /// scenario is used unless one is given.
    pub fn draw(s: &SystemScenario, seed: Option<u64>) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.unwrap_or(s.offers.seed));
        let o = &s.offers;
        let (n_sg, n_reg, n_ess, n_vpp) = (s.sgs.len(), s.regs.len(), s.ess.len(), s.vpps.len());
        let mut book = OfferBook {
            sg_energy: Vec::new(),
            reg_energy: Vec::new(),
            reg_inertia: Vec::new(),
            reg_droop: Vec::new(),
            ess_energy: Vec::new(),
            ess_inertia: Vec::new(),
            ess_droop: Vec::new(),
            vpp_energy_sg: Vec::new(),
            vpp_energy_other: Vec::new(),
            vpp_inertia: Vec::new(),
            vpp_droop: Vec::new(),
        };
        let mut row = |n: usize, [lo, hi]: [f64; 2]| -> Vec<f64> {
            (0..n)
                .map(|_| if hi > lo { rng.random_range(lo..=hi) } else { lo })
                .collect()
        };
        for _ in 0..s.periods {
            book.sg_energy.push(row(n_sg, o.sg_energy));
            book.reg_energy.push(row(n_reg, o.reg_energy));
            book.reg_inertia.push(row(n_reg, o.reg_inertia));
            book.reg_droop.push(row(n_reg, o.reg_droop));
            book.ess_energy.push(row(n_ess, o.ess_energy));
            book.ess_inertia.push(row(n_ess, o.ess_inertia));
            book.ess_droop.push(row(n_ess, o.ess_droop));
            book.vpp_energy_sg.push(row(n_vpp, o.vpp_energy_sg));
            book.vpp_energy_other.push(row(n_vpp, o.vpp_energy_other));
            book.vpp_inertia.push(row(n_vpp, o.vpp_inertia));
            book.vpp_droop.push(row(n_vpp, o.vpp_droop));
        }
        book
    }

    fn tables(&self) -> [&Vec<Vec<f64>>; 11] {
        [
            &self.sg_energy,
            &self.reg_energy,
            &self.reg_inertia,
            &self.reg_droop,
            &self.ess_energy,
            &self.ess_inertia,
            &self.ess_droop,
            &self.vpp_energy_sg,
            &self.vpp_energy_other,
            &self.vpp_inertia,
            &self.vpp_droop,
        ]
    }

    fn tables_mut(&mut self) -> [&mut Vec<Vec<f64>>; 11] {
        [
            &mut self.sg_energy,
            &mut self.reg_energy,
            &mut self.reg_inertia,
            &mut self.reg_droop,
            &mut self.ess_energy,
            &mut self.ess_inertia,
            &mut self.ess_droop,
            &mut self.vpp_energy_sg,
            &mut self.vpp_energy_other,
            &mut self.vpp_inertia,
            &mut self.vpp_droop,
        ]
    }

    /// Every price multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        let mut out = self.clone();
        for table in out.tables_mut() {
            table.iter_mut().flatten().for_each(|p| *p *= factor);
        }
        out
    }

    /// Checks shape against the scenario and that every price is finite and
    /// non-negative.
    pub fn validate(&self, s: &SystemScenario) -> Result<(), String> {
        let names = [
            "sg_energy",
            "reg_energy",
            "reg_inertia",
            "reg_droop",
            "ess_energy",
            "ess_inertia",
            "ess_droop",
            "vpp_energy_sg",
            "vpp_energy_other",
            "vpp_inertia",
            "vpp_droop",
        ];
        let units = [
            s.sgs.len(),
            s.regs.len(),
            s.regs.len(),
            s.regs.len(),
            s.ess.len(),
            s.ess.len(),
            s.ess.len(),
            s.vpps.len(),
            s.vpps.len(),
            s.vpps.len(),
            s.vpps.len(),
        ];
        for ((name, table), n) in names.iter().zip(self.tables()).zip(units) {
            if table.len() != s.periods {
                return Err(format!("{name}: {} periods, expected {}", table.len(), s.periods));
            }
            for (t, row) in table.iter().enumerate() {
                if row.len() != n {
                    return Err(format!("{name}[{t}]: {} prices, expected {n}", row.len()));
                }
                if let Some(p) = row.iter().find(|p| !(**p >= 0.0 && p.is_finite())) {
                    return Err(format!("{name}[{t}]: price {p}"));
                }
            }
        }
        Ok(())
    }
}
