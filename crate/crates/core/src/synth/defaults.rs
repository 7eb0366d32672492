//! Shipped panel layout and phenotypes.
//!
//! Ten fluorescence markers per tube plus three scatter channels. Medians
//! are in linear intensity units on a 262,144-channel scale; unlisted
//! markers fall back to a dim autofluorescence distribution.

use std::collections::BTreeMap;

use super::{CaseRecipe, ChannelDef, ChannelDist, EventCountSpec, PopulationSpec, SynthConfig, TubeLayout};
use crate::featurize::{CaseLabel, DEFAULT_CHANNELS};

const SCATTER_CV: f64 = 0.2;
const MARKER_CV: f64 = 0.45;

const TUBE_MARKERS: [[&str; 10]; 4] = [
    [
        "Kappa", "Lambda", "CD19", "CD5", "CD23", "CD10", "CD20", "CD45", "CD38", "CD3",
    ],
    [
        "CD8", "CD4", "CD19", "CD5", "CD200", "CD56", "CD16", "CD45", "CD14", "CD3",
    ],
    [
        "FMC7", "CD23", "CD19", "CD5", "CD79b", "CD22", "CD43", "CD45", "CD11c", "CD3",
    ],
    [
        "CD81", "CD38", "CD19", "CD5", "CD200", "CD10", "CD20", "CD45", "CD25", "CD3",
    ],
];

fn population(name: &str, fraction: f64, markers: &[(&str, f64)]) -> PopulationSpec {
    let markers: BTreeMap<String, ChannelDist> = markers
        .iter()
        .map(|&(m, median)| {
            let cv = if m.starts_with("FSC") || m.starts_with("SSC") {
                SCATTER_CV
            } else {
                MARKER_CV
            };
            (m.to_string(), ChannelDist::new(median, cv))
        })
        .collect();
    PopulationSpec {
        name: name.to_string(),
        fraction,
        markers,
    }
}

fn scatter(fsc: f64, ssc: f64) -> [(&'static str, f64); 3] {
    [("FSC-A", fsc), ("FSC-H", fsc * 0.85), ("SSC-A", ssc)]
}

fn with(base: &[(&'static str, f64)], more: &[(&'static str, f64)]) -> Vec<(&'static str, f64)> {
    base.iter().chain(more).copied().collect()
}

fn background() -> Vec<PopulationSpec> {
    let lymph = scatter(55_000.0, 14_000.0);
    let b_cell = with(
        &scatter(52_000.0, 13_000.0),
        &[
            ("CD45", 9_000.0),
            ("CD19", 5_000.0),
            ("CD20", 9_000.0),
            ("CD22", 4_000.0),
            ("CD79b", 4_500.0),
            ("FMC7", 3_500.0),
            ("CD81", 5_000.0),
            ("CD38", 1_200.0),
            ("CD200", 2_500.0),
            ("CD23", 600.0),
        ],
    );
    vec![
        population(
            "granulocytes",
            0.58,
            &with(
                &scatter(95_000.0, 110_000.0),
                &[
                    ("CD45", 2_500.0),
                    ("CD16", 9_000.0),
                    ("CD11c", 2_500.0),
                    ("CD10", 3_000.0),
                    ("CD38", 400.0),
                ],
            ),
        ),
        population(
            "monocytes",
            0.08,
            &with(
                &scatter(100_000.0, 45_000.0),
                &[
                    ("CD45", 7_000.0),
                    ("CD14", 9_000.0),
                    ("CD11c", 7_000.0),
                    ("CD4", 1_200.0),
                    ("CD38", 1_800.0),
                    ("CD43", 3_000.0),
                ],
            ),
        ),
        population(
            "t_helper",
            0.16,
            &with(
                &lymph,
                &[
                    ("CD45", 11_000.0),
                    ("CD3", 7_000.0),
                    ("CD5", 8_000.0),
                    ("CD4", 5_000.0),
                    ("CD43", 5_000.0),
                    ("CD25", 400.0),
                ],
            ),
        ),
        population(
            "t_cytotoxic",
            0.08,
            &with(
                &lymph,
                &[
                    ("CD45", 11_000.0),
                    ("CD3", 7_000.0),
                    ("CD5", 7_000.0),
                    ("CD8", 6_000.0),
                    ("CD43", 5_000.0),
                ],
            ),
        ),
        population(
            "nk",
            0.04,
            &with(
                &scatter(58_000.0, 17_000.0),
                &[
                    ("CD45", 9_000.0),
                    ("CD56", 4_000.0),
                    ("CD16", 6_000.0),
                    ("CD8", 800.0),
                    ("CD43", 4_000.0),
                ],
            ),
        ),
        population("b_kappa", 0.036, &with(&b_cell, &[("Kappa", 5_000.0)])),
        population("b_lambda", 0.024, &with(&b_cell, &[("Lambda", 4_500.0)])),
    ]
}

/// CD5+ CD23-bright CD200-bright B cells with dim CD20, CD22, CD79b and
/// surface light chain.
fn clone_variants() -> Vec<PopulationSpec> {
    let base = with(
        &scatter(50_000.0, 12_000.0),
        &[
            ("CD45", 6_500.0),
            ("CD19", 3_800.0),
            ("CD5", 3_000.0),
            ("CD23", 9_000.0),
            ("CD200", 12_000.0),
            ("CD20", 1_400.0),
            ("CD22", 1_200.0),
            ("CD79b", 500.0),
            ("CD43", 4_000.0),
            ("CD81", 700.0),
            ("CD38", 300.0),
            ("CD25", 1_500.0),
        ],
    );
    vec![
        population("clone_kappa", 0.6, &with(&base, &[("Kappa", 1_200.0)])),
        population("clone_lambda", 0.4, &with(&base, &[("Lambda", 1_000.0)])),
    ]
}

/// Events per tube: median 77,416, clamped to 15,574–904,338.
pub fn default_event_counts() -> EventCountSpec {
    EventCountSpec {
        median: 77_416,
        sigma: 0.6,
        min: 15_574,
        max: 904_338,
    }
}

impl Default for SynthConfig {
    fn default() -> Self {
        let tubes = TUBE_MARKERS
            .iter()
            .map(|markers| TubeLayout {
                channels: DEFAULT_CHANNELS
                    .iter()
                    .enumerate()
                    .map(|(i, &name)| ChannelDef {
                        name: name.to_string(),
                        marker: if i < 3 {
                            name.to_string()
                        } else {
                            markers[i - 3].to_string()
                        },
                    })
                    .collect(),
            })
            .collect();
        let recipe = |label, clone_fraction, clone| CaseRecipe {
            label,
            clone_fraction,
            events: default_event_counts(),
            background: background(),
            clone,
        };
        SynthConfig {
            tubes,
            range: 262_144,
            negative: ChannelDist::new(150.0, 0.7),
            normal: recipe(CaseLabel::Normal, [0.0, 0.0], Vec::new()),
            cll: recipe(CaseLabel::Cll, [0.55, 0.95], clone_variants()),
            mbcll: recipe(CaseLabel::Mbcll, [0.3, 0.5], clone_variants()),
        }
    }
}
