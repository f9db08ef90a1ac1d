use std::fmt;

/// One reversible reaction over the internal species.
#[derive(Debug, Clone, PartialEq)]
pub struct ReactionDecl {
    pub label: String,
    /// Reactant counts ν⁺ over internal species.
    pub nu_plus: Vec<u32>,
    /// Product counts ν⁻ over internal species.
    pub nu_minus: Vec<u32>,
    /// Chemostat multiplicities on the reactant side, indexed like `ReactionNetwork::chemostats`.
    pub chemo_plus: Vec<u32>,
    pub chemo_minus: Vec<u32>,
    pub k_plus: f64,
    pub k_minus: f64,
    pub k_plus_eff: f64,
    pub k_minus_eff: f64,
}

impl ReactionDecl {
    /// Net change ν⁻ − ν⁺.
    pub fn nu(&self) -> Vec<i64> {
        self.nu_minus.iter().zip(&self.nu_plus).map(|(&m, &p)| m as i64 - p as i64).collect()
    }

    pub fn nu_f64(&self) -> Vec<f64> {
        self.nu().into_iter().map(|v| v as f64).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Chemostat {
    pub name: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReactionNetwork {
    pub name: String,
    pub species: Vec<String>,
    pub chemostats: Vec<Chemostat>,
    pub reactions: Vec<ReactionDecl>,
}

/// Identifies a tunable scalar of the network.
#[derive(Debug, Clone, PartialEq)]
pub enum Parameter {
    Chemostat(String),
    /// Forward (`true`) or backward rate constant of a labelled reaction.
    Rate { label: String, forward: bool },
}

impl Parameter {
    /// `A` names a chemostat, `r1.kplus` / `r1.kminus` a rate constant.
    pub fn parse(text: &str) -> Option<Self> {
        match text.split_once('.') {
            Some((label, "kplus")) => Some(Self::Rate { label: label.to_string(), forward: true }),
            Some((label, "kminus")) => Some(Self::Rate { label: label.to_string(), forward: false }),
            Some(_) => None,
            None => Some(Self::Chemostat(text.to_string())),
        }
    }
}

impl fmt::Display for Parameter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Chemostat(c) => write!(f, "{c}"),
            Self::Rate { label, forward: true } => write!(f, "{label}.kplus"),
            Self::Rate { label, forward: false } => write!(f, "{label}.kminus"),
        }
    }
}

impl ReactionNetwork {
    pub fn n_species(&self) -> usize {
        self.species.len()
    }

    pub fn n_reactions(&self) -> usize {
        self.reactions.len()
    }

    pub fn species_index(&self, name: &str) -> Option<usize> {
        self.species.iter().position(|s| s == name)
    }

    pub fn chemostat_index(&self, name: &str) -> Option<usize> {
        self.chemostats.iter().position(|c| c.name == name)
    }

    pub fn reaction_index(&self, label: &str) -> Option<usize> {
        self.reactions.iter().position(|r| r.label == label)
    }

    /// Stoichiometric rows νⱼ as floats.
    pub fn stoich_f64(&self) -> Vec<Vec<f64>> {
        self.reactions.iter().map(ReactionDecl::nu_f64).collect()
    }

    /// Recompute effective rates from declared rates and chemostat values.
    pub fn refold(&mut self) {
        for r in &mut self.reactions {
            let fold = |mult: &[u32]| -> f64 {
                mult.iter().zip(&self.chemostats).map(|(&m, c)| c.value.powi(m as i32)).product()
            };
            r.k_plus_eff = r.k_plus * fold(&r.chemo_plus);
            r.k_minus_eff = r.k_minus * fold(&r.chemo_minus);
        }
    }

    pub fn parameter_value(&self, param: &Parameter) -> Option<f64> {
        match param {
            Parameter::Chemostat(c) => self.chemostat_index(c).map(|i| self.chemostats[i].value),
            Parameter::Rate { label, forward } => {
                let r = &self.reactions[self.reaction_index(label)?];
                Some(if *forward { r.k_plus } else { r.k_minus })
            }
        }
    }

    /// A copy with one parameter replaced and effective rates refolded.
    pub fn with_parameter(&self, param: &Parameter, value: f64) -> Option<Self> {
        let mut net = self.clone();
        match param {
            Parameter::Chemostat(c) => {
                let i = net.chemostat_index(c)?;
                net.chemostats[i].value = value;
            }
            Parameter::Rate { label, forward } => {
                let j = net.reaction_index(label)?;
                if *forward {
                    net.reactions[j].k_plus = value;
                } else {
                    net.reactions[j].k_minus = value;
                }
            }
        }
        net.refold();
        Some(net)
    }

    fn write_side(&self, f: &mut fmt::Formatter<'_>, internal: &[u32], chemo: &[u32]) -> fmt::Result {
        let terms: Vec<String> = internal
            .iter()
            .zip(&self.species)
            .chain(chemo.iter().zip(self.chemostats.iter().map(|c| &c.name)))
            .filter(|(&m, _)| m > 0)
            .map(|(&m, name)| if m == 1 { name.clone() } else { format!("{m} {name}") })
            .collect();
        if terms.is_empty() {
            write!(f, "0")
        } else {
            write!(f, "{}", terms.join(" + "))
        }
    }
}

impl fmt::Display for ReactionNetwork {
    /// Prints the network in the DSL; parsing the output yields an equal network.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "network {}", self.name)?;
        writeln!(f, "species {}", self.species.join(", "))?;
        if !self.chemostats.is_empty() {
            let cs: Vec<String> = self.chemostats.iter().map(|c| format!("{} = {:?}", c.name, c.value)).collect();
            writeln!(f, "chemostat {}", cs.join(", "))?;
        }
        for r in &self.reactions {
            write!(f, "reaction {}: ", r.label)?;
            self.write_side(f, &r.nu_plus, &r.chemo_plus)?;
            write!(f, " <=> ")?;
            self.write_side(f, &r.nu_minus, &r.chemo_minus)?;
            writeln!(f, " ; kplus = {:?}, kminus = {:?}", r.k_plus, r.k_minus)?;
        }
        Ok(())
    }
}
