//! Synthetic multi-tube cohorts with normal, CLL and MBCLL phenotypes.
//!
//! Every event belongs to one population, and each channel value is an
//! independent log-normal draw from that population's distribution for the
//! marker measured on the channel (markers a population does not list use
//! the configuration's `negative` distribution). Positive cases add a clonal
//! B-cell population whose share of events is drawn per case from the
//! recipe's clone-fraction range; background populations fill the rest in
//! proportion to their fractions.
//!
//! This is a test fixture with a plausible immunophenotype, not a biological
//! simulator: there is no spillover, doublets or instrument noise model.

mod cohort;
mod defaults;

use std::collections::BTreeMap;
use std::path::PathBuf;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fcs::{EventMatrix, FcsDataset, FcsError, ParameterInfo};
use crate::featurize::CaseLabel;
use crate::seeds::{mix_seed, mix_seed_str};

pub use cohort::{generate_cohort, CaseRecord, CohortPlan, CohortSummary, LabelCounts, COHORT_FILE, MANIFEST_FILE};

const FRACTION_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid recipe: {0}")]
    InvalidRecipe(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("case {case_id}: {source}")]
    Fcs {
        case_id: String,
        #[source]
        source: FcsError,
    },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = SynthError> = std::result::Result<T, E>;

/// Log-normal intensity distribution given by its median and coefficient
/// of variation (so `σ² = ln(1 + cv²)`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelDist {
    pub median: f64,
    pub cv: f64,
}

impl ChannelDist {
    pub fn new(median: f64, cv: f64) -> Self {
        ChannelDist { median, cv }
    }

    /// `(μ, σ)` of the underlying normal.
    pub fn log_params(&self) -> (f64, f64) {
        (self.median.ln(), (1.0 + self.cv * self.cv).ln().sqrt())
    }

    fn validate(&self, what: &str) -> Result<()> {
        if !(self.median > 0.0 && self.median.is_finite()) {
            return Err(SynthError::InvalidRecipe(format!("{what}: median must be positive")));
        }
        if !(self.cv >= 0.0 && self.cv.is_finite()) {
            return Err(SynthError::InvalidRecipe(format!("{what}: cv must be non-negative")));
        }
        Ok(())
    }
}

/// A cell population: its share of events and its per-marker intensities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PopulationSpec {
    pub name: String,
    pub fraction: f64,
    /// Keyed by marker (antibody or scatter channel name).
    pub markers: BTreeMap<String, ChannelDist>,
}

/// Checks a set of population weights: each in [0, 1], summing to 1.
fn validate_populations(pops: &[PopulationSpec], what: &str) -> Result<()> {
    if pops.is_empty() {
        return Err(SynthError::InvalidRecipe(format!("{what}: no populations")));
    }
    let mut sum = 0.0;
    for p in pops {
        if !(0.0..=1.0).contains(&p.fraction) {
            return Err(SynthError::InvalidRecipe(format!(
                "{what}: population {} has fraction {} outside [0, 1]",
                p.name, p.fraction
            )));
        }
        sum += p.fraction;
        for (marker, d) in &p.markers {
            d.validate(&format!("{what}: population {} marker {marker}", p.name))?;
        }
    }
    if (sum - 1.0).abs() > FRACTION_TOLERANCE {
        return Err(SynthError::InvalidRecipe(format!(
            "{what}: fractions sum to {sum}, not 1"
        )));
    }
    Ok(())
}

/// Per-tube event counts: log-normal around `median`, clamped to
/// `[min, max]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EventCountSpec {
    pub median: u64,
    /// Standard deviation of the log count.
    pub sigma: f64,
    pub min: u64,
    pub max: u64,
}

impl EventCountSpec {
    pub fn fixed(n: u64) -> Self {
        EventCountSpec {
            median: n,
            sigma: 0.0,
            min: n,
            max: n,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.min >= 1 && self.min <= self.median && self.median <= self.max) {
            return Err(SynthError::InvalidRecipe(
                "event counts need 1 <= min <= median <= max".into(),
            ));
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(SynthError::InvalidRecipe(
                "event-count sigma must be non-negative".into(),
            ));
        }
        Ok(())
    }

    fn sample<R: Rng>(&self, rng: &mut R) -> usize {
        let z: f64 = rng.sample(StandardNormal);
        let n = (self.median as f64 * (self.sigma * z).exp()).round();
        (n as u64).clamp(self.min, self.max) as usize
    }
}

/// How to draw one case of a given label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseRecipe {
    pub label: CaseLabel,
    /// Range the per-case clone fraction is drawn from uniformly; `[0, 0]`
    /// for normal cases.
    pub clone_fraction: [f64; 2],
    pub events: EventCountSpec,
    /// Non-clonal populations; fractions sum to 1.
    pub background: Vec<PopulationSpec>,
    /// Alternative clone phenotypes (e.g. kappa- or lambda-restricted); one
    /// is chosen per case with probability equal to its fraction.
    pub clone: Vec<PopulationSpec>,
}

impl CaseRecipe {
    pub fn validate(&self) -> Result<()> {
        let [lo, hi] = self.clone_fraction;
        if !(0.0 <= lo && lo <= hi && hi <= 1.0) {
            return Err(SynthError::InvalidRecipe(format!(
                "clone_fraction [{lo}, {hi}] is not a sub-range of [0, 1]"
            )));
        }
        if self.label == CaseLabel::Normal && hi > 0.0 {
            return Err(SynthError::InvalidRecipe("normal cases have no clone".into()));
        }
        if self.label != CaseLabel::Normal && hi == 0.0 {
            return Err(SynthError::InvalidRecipe(format!(
                "{} cases need a positive clone fraction",
                self.label
            )));
        }
        self.events.validate()?;
        validate_populations(&self.background, "background")?;
        if hi > 0.0 {
            validate_populations(&self.clone, "clone")?;
        }
        Ok(())
    }
}

/// One channel of a tube and the marker it measures.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelDef {
    /// `$PnN` short name, e.g. `"PE-A"`.
    pub name: String,
    /// Marker looked up in population specs, e.g. `"CD5"` or `"FSC-A"`.
    pub marker: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TubeLayout {
    pub channels: Vec<ChannelDef>,
}

/// Instrument layout and per-label recipes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub tubes: Vec<TubeLayout>,
    /// `$PnR` of every channel; values are clipped to `[0, range]`.
    pub range: u64,
    /// Distribution of markers a population does not express.
    pub negative: ChannelDist,
    pub normal: CaseRecipe,
    pub cll: CaseRecipe,
    pub mbcll: CaseRecipe,
}

impl SynthConfig {
    pub fn recipe(&self, label: CaseLabel) -> &CaseRecipe {
        match label {
            CaseLabel::Normal => &self.normal,
            CaseLabel::Cll => &self.cll,
            CaseLabel::Mbcll => &self.mbcll,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.tubes.is_empty() {
            return Err(SynthError::InvalidConfig("no tubes".into()));
        }
        for (i, t) in self.tubes.iter().enumerate() {
            if t.channels.is_empty() {
                return Err(SynthError::InvalidConfig(format!("tube {} has no channels", i + 1)));
            }
            let mut names: Vec<&str> = t.channels.iter().map(|c| c.name.as_str()).collect();
            names.sort_unstable();
            if names.windows(2).any(|w| w[0].eq_ignore_ascii_case(w[1])) {
                return Err(SynthError::InvalidConfig(format!(
                    "tube {} repeats a channel name",
                    i + 1
                )));
            }
        }
        if self.range == 0 {
            return Err(SynthError::InvalidConfig("range must be positive".into()));
        }
        self.negative.validate("negative")?;
        for (label, r) in [
            (CaseLabel::Normal, &self.normal),
            (CaseLabel::Cll, &self.cll),
            (CaseLabel::Mbcll, &self.mbcll),
        ] {
            if r.label != label {
                return Err(SynthError::InvalidConfig(format!(
                    "recipe for {label} is labeled {}",
                    r.label
                )));
            }
            r.validate()
                .map_err(|e| SynthError::InvalidConfig(format!("{label} recipe: {e}")))?;
        }
        if self.mbcll.clone_fraction[1] >= self.cll.clone_fraction[0] {
            return Err(SynthError::InvalidConfig(
                "MBCLL clone fractions must lie below CLL clone fractions".into(),
            ));
        }
        Ok(())
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let c: SynthConfig = serde_json::from_str(s)?;
        c.validate()?;
        Ok(c)
    }
}

/// A generated case: its tubes plus the draws that produced them.
#[derive(Debug, Clone)]
pub struct GeneratedCase {
    pub case_id: String,
    pub label: CaseLabel,
    pub seed: u64,
    pub clone_fraction: f64,
    pub clone_variant: Option<String>,
    /// Population names in mixture order: background, then the clone.
    pub populations: Vec<String>,
    /// Per tube, events drawn from each population.
    pub population_counts: Vec<Vec<u64>>,
    pub tubes: Vec<FcsDataset>,
}

/// Seed of a case; depends only on the master seed and the case id.
pub fn case_seed(seed: u64, case_id: &str) -> u64 {
    mix_seed_str(seed, case_id)
}

/// Draws the four (or however many the layout has) tubes of one case.
/// Deterministic in `(config, recipe, case_id, seed)`.
pub fn generate_case(config: &SynthConfig, recipe: &CaseRecipe, case_id: &str, seed: u64) -> Result<GeneratedCase> {
    recipe.validate()?;
    let cseed = case_seed(seed, case_id);
    let mut rng = ChaCha8Rng::seed_from_u64(cseed);
    let [lo, hi] = recipe.clone_fraction;
    let clone_fraction = if hi > lo { rng.random_range(lo..=hi) } else { lo };
    let clone = if hi > 0.0 {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut pick = recipe.clone.last();
        for c in &recipe.clone {
            acc += c.fraction;
            if u < acc {
                pick = Some(c);
                break;
            }
        }
        pick
    } else {
        None
    };

    let mut mixture: Vec<(&PopulationSpec, f64)> = recipe
        .background
        .iter()
        .map(|p| (p, p.fraction * (1.0 - clone_fraction)))
        .collect();
    if let Some(c) = clone {
        mixture.push((c, clone_fraction));
    }
    let cumulative: Vec<f64> = mixture
        .iter()
        .scan(0.0, |acc, (_, w)| {
            *acc += w;
            Some(*acc)
        })
        .collect();

    let mut tubes = Vec::with_capacity(config.tubes.len());
    let mut population_counts = Vec::with_capacity(config.tubes.len());
    for (t, layout) in config.tubes.iter().enumerate() {
        let mut trng = ChaCha8Rng::seed_from_u64(mix_seed(cseed, t as u64));
        let n_events = recipe.events.sample(&mut trng);
        let dists: Vec<Vec<LogNormal<f64>>> = mixture
            .iter()
            .map(|(pop, _)| {
                layout
                    .channels
                    .iter()
                    .map(|ch| {
                        let d = pop.markers.get(&ch.marker).unwrap_or(&config.negative);
                        let (mu, sigma) = d.log_params();
                        LogNormal::new(mu, sigma).expect("validated log-normal parameters")
                    })
                    .collect()
            })
            .collect();
        let n_params = layout.channels.len();
        let max = config.range as f64;
        let mut values = Vec::with_capacity(n_events * n_params);
        let mut counts = vec![0u64; mixture.len()];
        let total = *cumulative.last().unwrap_or(&1.0);
        for _ in 0..n_events {
            let u: f64 = trng.random::<f64>() * total;
            let k = cumulative.iter().position(|&c| u < c).unwrap_or(mixture.len() - 1);
            counts[k] += 1;
            for d in &dists[k] {
                values.push(d.sample(&mut trng).min(max) as f32);
            }
        }
        let events = EventMatrix::new(n_events, n_params, values).map_err(|source| SynthError::Fcs {
            case_id: case_id.to_string(),
            source,
        })?;
        let params = layout
            .channels
            .iter()
            .map(|ch| {
                let stain = (ch.marker != ch.name).then_some(ch.marker.as_str());
                ParameterInfo::float(&ch.name, config.range, stain)
            })
            .collect();
        let extra = [
            ("$CYT".to_string(), "synthetic".to_string()),
            ("$SRC".to_string(), case_id.to_string()),
            ("TUBE NAME".to_string(), format!("tube{}", t + 1)),
        ];
        let ds = FcsDataset::from_events(params, events, extra).map_err(|source| SynthError::Fcs {
            case_id: case_id.to_string(),
            source,
        })?;
        tubes.push(ds);
        population_counts.push(counts);
    }
    Ok(GeneratedCase {
        case_id: case_id.to_string(),
        label: recipe.label,
        seed: cseed,
        clone_fraction,
        clone_variant: clone.map(|c| c.name.clone()),
        populations: mixture.iter().map(|(p, _)| p.name.clone()).collect(),
        population_counts,
        tubes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(mut recipe: CaseRecipe, n: u64) -> CaseRecipe {
        recipe.events = EventCountSpec::fixed(n);
        recipe
    }

    #[test]
    fn default_config_is_valid() {
        let c = SynthConfig::default();
        c.validate().unwrap();
        assert_eq!(c.tubes.len(), 4);
        assert!(c.tubes.iter().all(|t| t.channels.len() == 13));
        let json = serde_json::to_string(&c).unwrap();
        assert_eq!(SynthConfig::from_json(&json).unwrap(), c);
    }

    #[test]
    fn normal_case_has_no_clone() {
        let c = SynthConfig::default();
        let g = generate_case(&c, &small(c.normal.clone(), 500), "n1", 1).unwrap();
        assert_eq!(g.clone_fraction, 0.0);
        assert!(g.clone_variant.is_none());
        assert_eq!(g.populations.len(), c.normal.background.len());
        for (tube, counts) in g.tubes.iter().zip(&g.population_counts) {
            assert_eq!(tube.n_events(), 500);
            assert_eq!(tube.n_params(), 13);
            assert_eq!(counts.iter().sum::<u64>(), 500);
        }
    }

    #[test]
    fn deterministic_per_case_id() {
        let c = SynthConfig::default();
        let r = small(c.cll.clone(), 300);
        let a = generate_case(&c, &r, "x", 5).unwrap();
        let b = generate_case(&c, &r, "x", 5).unwrap();
        let d = generate_case(&c, &r, "y", 5).unwrap();
        for (ta, tb) in a.tubes.iter().zip(&b.tubes) {
            assert_eq!(ta.events, tb.events);
        }
        assert_ne!(a.tubes[0].events, d.tubes[0].events);
    }

    #[test]
    fn recipe_validation() {
        let c = SynthConfig::default();
        let mut r = c.normal.clone();
        r.clone_fraction = [0.1, 0.2];
        assert!(r.validate().is_err());
        let mut r = c.cll.clone();
        r.background[0].fraction += 0.01;
        assert!(r.validate().is_err());
        let mut r = c.cll.clone();
        r.clone_fraction = [0.5, 0.4];
        assert!(r.validate().is_err());
        let mut bad = c.clone();
        bad.mbcll.clone_fraction = [0.1, 0.6];
        assert!(bad.validate().is_err());
    }
}
