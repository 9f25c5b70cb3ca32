//! The reference variable layout: six capacities with 47 indicator
//! variables grouped into 13 capacity factors, eight controls and GDP per
//! capita as the outcome.

/// One capacity factor: a stable identifier, a display label and the anchor
/// variable that identifies (and orients) the factor after rotation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FactorDef {
    pub id: &'static str,
    pub label: &'static str,
    pub anchor: &'static str,
    /// Variables the factor is built on in the synthetic generator; the
    /// first one is the anchor. A leading `-` marks a negative loading.
    pub block: &'static [&'static str],
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CapacityDef {
    pub name: &'static str,
    pub factors: &'static [FactorDef],
}

impl CapacityDef {
    /// Variable codes of this capacity, in block order.
    pub fn variables(&self) -> Vec<&'static str> {
        self.factors
            .iter()
            .flat_map(|f| f.block.iter().map(|v| v.trim_start_matches('-')))
            .collect()
    }
}

pub const OUTCOME: &str = "ogdpperpcapconst2010us";

pub const CONTROLS: [&str; 8] = [
    "ctecccopgrantbopcurr",
    "cpoptot",
    "cgroscapformcons2010us",
    "cintltournoarrivals",
    "cmerchimpfmhighpermerchimp",
    "cnetodaandoffreceivcon2018",
    "hcurhealthexpperdp",
    "hemplyrptotemp",
];

pub const CAPACITIES: [CapacityDef; 6] = [
    CapacityDef {
        name: "Technological Capacity",
        factors: &[
            FactorDef {
                id: "base_sci_tech",
                label: "Base sci & tech",
                anchor: "tscitjar",
                block: &["tscitjar", "tippay", "tsecedvoc"],
            },
            FactorDef {
                id: "medium_sci_tech",
                label: "Medium sci & tech",
                anchor: "tresinrandd",
                block: &["tresinrandd", "teciscore"],
            },
            FactorDef {
                id: "high_sci_tech",
                label: "High sci & tech",
                anchor: "thigexperofmanex",
                block: &["thigexperofmanex", "trandd", "ttechinrandd"],
            },
        ],
    },
    CapacityDef {
        name: "Financial Capacity",
        factors: &[
            FactorDef {
                id: "financial_infrastructure",
                label: "Financial infrastructure",
                anchor: "fdomcrprsecbybkpergdp",
                block: &[
                    "fdomcrprsecbybkpergdp",
                    "fnewbusdenper1k",
                    "faccownperofpop15p",
                    "fcombkbrlk",
                ],
            },
            FactorDef {
                id: "financial_environment",
                label: "Financial (business) environment",
                anchor: "ftdaystobusi",
                block: &["ftdaystobusi", "fcosbstpropergni", "fopenind"],
            },
            FactorDef {
                id: "financial_regulation",
                label: "Strength of financial regulations",
                anchor: "fdaystoenfcct",
                block: &["fdaystoenfcct", "ftaxrpergdp"],
            },
            FactorDef {
                id: "enabling_financial_env",
                label: "Enabling financial environment",
                anchor: "fdaystoobteleconn",
                block: &["fdaystoobteleconn", "fdaystoregpro"],
            },
        ],
    },
    CapacityDef {
        name: "Human Capacity",
        factors: &[
            FactorDef {
                id: "specialized_skills",
                label: "Specialized skills",
                anchor: "hsecenrollpergross",
                block: &[
                    "hsecenrollpergross",
                    "hhciscscale0to1",
                    "hempinduspertotem",
                    "hempserpertotem",
                    "hgvtxpedupergrp",
                    "hcompedyears",
                    "hprimcompra",
                ],
            },
            FactorDef {
                id: "generalized_skills",
                label: "Generalized skills",
                anchor: "hprimenrollpergross",
                block: &["hprimenrollpergross", "-hpupteapriratio", "hlfwithadedu"],
            },
        ],
    },
    CapacityDef {
        name: "Infrastructure Capacity",
        factors: &[
            FactorDef {
                id: "infrastructure_ict_energy",
                label: "Infrastructure (ICT & energy)",
                anchor: "ibdbandsubper100",
                block: &[
                    "ibdbandsubper100",
                    "iaccesselecperpop",
                    "itelesubper100",
                    "ienergyusepercap",
                    "iindintperpop",
                ],
            },
            FactorDef {
                id: "logistics_performance",
                label: "Logistic Per. Index (trade & transport infras.)",
                anchor: "ilpiquoftrataninfr",
                block: &["ilpiquoftrataninfr", "imobsubper100"],
            },
        ],
    },
    CapacityDef {
        name: "Public Policy Capacity",
        factors: &[FactorDef {
            id: "public_policy",
            label: "Public policy (inc. fiscal, monetary, structural...)",
            anchor: "pcpiastpolclavg1to6",
            block: &[
                "pcpiastpolclavg1to6",
                "iscapscoravg",
                "pcpiaeconmgctl1to6",
                "pcpiapmsgandinscl1to6",
                "pstrengthoflegalright",
            ],
        }],
    },
    CapacityDef {
        name: "Social Capacity",
        factors: &[FactorDef {
            id: "social_capacity",
            label: "Social capacity (incl. equity, inclusion, etc.)",
            anchor: "scpiapolsocincl1to6",
            block: &[
                "scpiapolsocincl1to6",
                "scpiabdhumanres1to6",
                "scpiaeqofpbresuse1to6",
                "scpiasocprorat1to6",
                "-spovheadcnational",
                "ssocialconperofrev",
            ],
        }],
    },
];

/// Regression row order of the capacity factors.
pub const REGRESSION_ORDER: [&str; 13] = [
    "public_policy",
    "infrastructure_ict_energy",
    "logistics_performance",
    "specialized_skills",
    "generalized_skills",
    "financial_infrastructure",
    "financial_environment",
    "financial_regulation",
    "enabling_financial_env",
    "base_sci_tech",
    "medium_sci_tech",
    "high_sci_tech",
    "social_capacity",
];

/// The four factors used for country clustering, one per significant capacity.
pub const CLUSTER_FACTORS: [&str; 4] = [
    "public_policy",
    "infrastructure_ict_energy",
    "specialized_skills",
    "financial_infrastructure",
];

/// Location and spread of each raw variable in the synthetic generator,
/// roughly matching the published descriptive statistics.
pub fn raw_scale(code: &str) -> (f64, f64) {
    match code {
        "tscitjar" => (1270.77, 9395.79),
        "tippay" => (65.35, 492.20),
        "tsecedvoc" => (111698.6, 253483.79),
        "trandd" => (0.21, 0.16),
        "tresinrandd" => (162.65, 225.9),
        "ttechinrandd" => (57.02, 63.01),
        "thigexperofmanex" => (6.23, 9.29),
        "teciscore" => (-0.72, 0.63),
        "ftaxrpergdp" => (16.22, 11.71),
        "fcosbstpropergni" => (85.38, 137.76),
        "fdomcrprsecbybkpergdp" => (25.07, 20.37),
        "ftdaystobusi" => (35.34, 37.71),
        "fdaystoenfcct" => (666.61, 329.52),
        "fdaystoregpro" => (87.33, 97.58),
        "fopenind" => (0.11, 0.08),
        "fdaystoobteleconn" => (37.24, 33.64),
        "fnewbusdenper1k" => (1.06, 1.47),
        "faccownperofpop15p" => (30.94, 22.53),
        "fcombkbrlk" => (10.49, 11.99),
        "hprimenrollpergross" => (103.36, 18.18),
        "hsecenrollpergross" => (57.49, 25.99),
        "hpupteapriratio" => (34.43, 14.36),
        "hprimcompra" => (79.41, 20.89),
        "hgvtxpedupergrp" => (4.36, 2.22),
        "hhciscscale0to1" => (0.42, 0.09),
        "hlfwithadedu" => (75.5, 10.55),
        "hcompedyears" => (8.45, 2.16),
        "hempinduspertotem" => (14.52, 7.0),
        "hempserpertotem" => (39.43, 15.05),
        "imobsubper100" => (59.12, 38.15),
        "iaccesselecperpop" => (57.02, 31.3),
        "ibdbandsubper100" => (1.97, 4.12),
        "itelesubper100" => (5.31, 7.39),
        "ienergyusepercap" => (560.21, 392.9),
        "ilpiquoftrataninfr" => (2.18, 0.33),
        "iindintperpop" => (16.0, 16.3),
        "pcpiaeconmgctl1to6" => (3.39, 0.69),
        "pcpiapmsgandinscl1to6" => (3.06, 0.5),
        "pcpiastpolclavg1to6" => (3.3, 0.54),
        "iscapscoravg" => (59.82, 14.89),
        "pstrengthoflegalright" => (4.83, 3.1),
        "scpiabdhumanres1to6" => (3.52, 0.63),
        "scpiaeqofpbresuse1to6" => (3.38, 0.64),
        "scpiasocprorat1to6" => (3.03, 0.59),
        "scpiapolsocincl1to6" => (3.28, 0.51),
        "spovheadcnational" => (38.52, 15.13),
        "ssocialconperofrev" => (3.23, 7.53),
        "ctecccopgrantbopcurr" => (92.57e6, 108.2e6),
        "cpoptot" => (34.61e6, 141e6),
        "cgroscapformcons2010us" => (15.69e9, 79.49e9),
        "cintltournoarrivals" => (0.96e6, 1.8e6),
        "cmerchimpfmhighpermerchimp" => (49.31, 20.07),
        "cnetodaandoffreceivcon2018" => (820.7e6, 1058e6),
        "hcurhealthexpperdp" => (6.09, 3.13),
        "hemplyrptotemp" => (2.24, 2.31),
        _ => (0.0, 1.0),
    }
}

/// All 47 capacity variable codes.
pub fn capacity_variables() -> Vec<&'static str> {
    CAPACITIES.iter().flat_map(|c| c.variables()).collect()
}

pub fn factor_def(id: &str) -> Option<&'static FactorDef> {
    CAPACITIES
        .iter()
        .flat_map(|c| c.factors.iter())
        .find(|f| f.id == id)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn layout_counts() {
        let vars = capacity_variables();
        assert_eq!(vars.len(), 47);
        assert_eq!(vars.iter().collect::<HashSet<_>>().len(), 47);
        let factors: usize = CAPACITIES.iter().map(|c| c.factors.len()).sum();
        assert_eq!(factors, 13);
        let per: Vec<usize> = CAPACITIES.iter().map(|c| c.factors.len()).collect();
        assert_eq!(per, vec![3, 4, 2, 2, 1, 1]);
        let mut ids: Vec<&str> = REGRESSION_ORDER.to_vec();
        ids.sort();
        let mut all: Vec<&str> = CAPACITIES.iter().flat_map(|c| c.factors.iter().map(|f| f.id)).collect();
        all.sort();
        assert_eq!(ids, all);
        for f in CAPACITIES.iter().flat_map(|c| c.factors.iter()) {
            assert_eq!(f.block[0], f.anchor);
        }
    }
}
