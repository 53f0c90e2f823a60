//! Latent market state and scripted shocks.

use std::collections::BTreeMap;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::domain::{Grade, Shape};
use crate::index::N_CARAT_CLASSES;
use crate::{HciError, Result};

const N_SHAPES: usize = 10;

/// Moves `fraction` of the `from` shape's listings to `to`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VolumeShift {
    pub from: Shape,
    pub to: Shape,
    pub fraction: f64,
}

/// Multiplicative price factors and volume shifts in force at one date.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarketState {
    pub date: NaiveDate,
    pub group_factor: [f64; N_CARAT_CLASSES],
    pub shape_factor: [f64; N_SHAPES],
    #[serde(default)]
    pub shape_mix_shift: Vec<VolumeShift>,
}

impl MarketState {
    /// All factors one, no shifts.
    pub fn neutral(date: NaiveDate) -> Self {
        MarketState {
            date,
            group_factor: [1.0; N_CARAT_CLASSES],
            shape_factor: [1.0; N_SHAPES],
            shape_mix_shift: Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self
            .group_factor
            .iter()
            .chain(self.shape_factor.iter())
            .all(|&f| f > 0.0 && f.is_finite());
        if !ok {
            return Err(HciError::Config(format!("{}: market factors must be positive", self.date)));
        }
        if self
            .shape_mix_shift
            .iter()
            .any(|s| !(0.0..=1.0).contains(&s.fraction))
        {
            return Err(HciError::Config(format!("{}: volume shift fraction outside [0, 1]", self.date)));
        }
        Ok(())
    }

    /// Shape frequencies after applying the volume shifts in order; the total
    /// is conserved.
    pub fn shifted_mix(&self, base: &[f64]) -> Vec<f64> {
        let mut mix = base.to_vec();
        for s in &self.shape_mix_shift {
            let moved = mix[s.from.ordinal()] * s.fraction;
            mix[s.from.ordinal()] -= moved;
            mix[s.to.ordinal()] += moved;
        }
        mix
    }
}

/// Neutral states for a list of dates.
pub fn neutral_states(dates: &[NaiveDate]) -> Vec<MarketState> {
    dates.iter().copied().map(MarketState::neutral).collect()
}

/// A stretch of snapshots sharing one set of multipliers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Phase {
    pub snapshots: usize,
    #[serde(default = "unit_groups")]
    pub group_multipliers: [f64; N_CARAT_CLASSES],
    #[serde(default)]
    pub shape_multipliers: BTreeMap<Shape, f64>,
    #[serde(default)]
    pub volume_shifts: Vec<VolumeShift>,
}

fn unit_groups() -> [f64; N_CARAT_CLASSES] {
    [1.0; N_CARAT_CLASSES]
}

/// One step of a phased decline: `change` is fractional (-0.05 is a 5% fall).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlumpStep {
    pub snapshots: usize,
    pub change: f64,
}

fn default_duration() -> usize {
    13
}
fn default_price_change() -> f64 {
    0.05
}
fn default_volume_shift() -> f64 {
    0.05
}
fn default_from() -> Shape {
    Shape::Round
}
fn default_to() -> Shape {
    Shape::Cushion
}
fn default_slump_classes() -> Vec<usize> {
    vec![1, 2]
}
fn default_schedule() -> Vec<SlumpStep> {
    vec![
        SlumpStep { snapshots: 3, change: -0.05 },
        SlumpStep { snapshots: 7, change: -0.10 },
        SlumpStep { snapshots: 3, change: -0.05 },
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum ScenarioKind {
    /// Price rise on one shape plus a relative volume move into it. The
    /// volume shift is a fraction of the `from` shape's own volume, and the
    /// price rise applies to every stone of the `to` shape, migrated or not.
    FashionShift {
        #[serde(default = "default_duration")]
        duration: usize,
        #[serde(default = "default_price_change")]
        price_change: f64,
        #[serde(default = "default_volume_shift")]
        volume_shift: f64,
        #[serde(default = "default_from")]
        from: Shape,
        #[serde(default = "default_to")]
        to: Shape,
    },
    /// Phased price decline on a set of carat classes (one-based numbers).
    SmallDiamondSlump {
        #[serde(default = "default_slump_classes")]
        classes: Vec<usize>,
        #[serde(default = "default_schedule")]
        schedule: Vec<SlumpStep>,
    },
    Custom {
        #[serde(default)]
        phases: Vec<Phase>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub start: NaiveDate,
    #[serde(flatten)]
    pub kind: ScenarioKind,
}

impl ScenarioSpec {
    pub fn fashion_shift(start: NaiveDate) -> Self {
        ScenarioSpec {
            start,
            kind: ScenarioKind::FashionShift {
                duration: default_duration(),
                price_change: default_price_change(),
                volume_shift: default_volume_shift(),
                from: default_from(),
                to: default_to(),
            },
        }
    }

    pub fn small_diamond_slump(start: NaiveDate) -> Self {
        ScenarioSpec {
            start,
            kind: ScenarioKind::SmallDiamondSlump {
                classes: default_slump_classes(),
                schedule: default_schedule(),
            },
        }
    }

    /// The scenario as a sequence of phases.
    pub fn phases(&self) -> Result<Vec<Phase>> {
        let phases = match &self.kind {
            ScenarioKind::FashionShift {
                duration,
                price_change,
                volume_shift,
                from,
                to,
            } => {
                if *duration < 1 {
                    return Err(HciError::Config("scenario duration must be >= 1".into()));
                }
                check_change(*price_change)?;
                if !(0.0..=1.0).contains(volume_shift) {
                    return Err(HciError::Config("volume_shift must lie in [0, 1]".into()));
                }
                vec![Phase {
                    snapshots: *duration,
                    group_multipliers: unit_groups(),
                    shape_multipliers: [(*to, 1.0 + price_change)].into_iter().collect(),
                    volume_shifts: vec![VolumeShift {
                        from: *from,
                        to: *to,
                        fraction: *volume_shift,
                    }],
                }]
            }
            ScenarioKind::SmallDiamondSlump { classes, schedule } => {
                if schedule.is_empty() || schedule.iter().any(|s| s.snapshots == 0) {
                    return Err(HciError::Config("slump schedule needs non-empty steps".into()));
                }
                if classes.iter().any(|&c| c == 0 || c > N_CARAT_CLASSES) {
                    return Err(HciError::Config("slump classes are numbered 1 to 7".into()));
                }
                schedule
                    .iter()
                    .map(|step| {
                        check_change(step.change)?;
                        let mut m = unit_groups();
                        for &c in classes {
                            m[c - 1] = 1.0 + step.change;
                        }
                        Ok(Phase {
                            snapshots: step.snapshots,
                            group_multipliers: m,
                            shape_multipliers: BTreeMap::new(),
                            volume_shifts: Vec::new(),
                        })
                    })
                    .collect::<Result<Vec<_>>>()?
            }
            ScenarioKind::Custom { phases } => {
                for p in phases {
                    if p.snapshots == 0 {
                        return Err(HciError::Config("custom phase must span >= 1 snapshot".into()));
                    }
                    for &m in p.group_multipliers.iter().chain(p.shape_multipliers.values()) {
                        check_change(m - 1.0)?;
                    }
                }
                phases.clone()
            }
        };
        Ok(phases)
    }

    /// Window length in snapshots.
    pub fn duration(&self) -> Result<usize> {
        Ok(self.phases()?.iter().map(|p| p.snapshots).sum())
    }
}

fn check_change(change: f64) -> Result<()> {
    if change > -1.0 && change.is_finite() {
        Ok(())
    } else {
        Err(HciError::Config(format!("price change {change} must exceed -100%")))
    }
}

/// Applies a scenario to a date-ordered state path. Phases multiply the
/// factors already present, so scenarios stack.
pub fn apply_scenario(states: &[MarketState], spec: &ScenarioSpec) -> Result<Vec<MarketState>> {
    let phases = spec.phases()?;
    let duration: usize = phases.iter().map(|p| p.snapshots).sum();
    let mut out = states.to_vec();
    if duration == 0 {
        return Ok(out);
    }
    let start = states
        .iter()
        .position(|s| s.date == spec.start)
        .ok_or_else(|| HciError::Config(format!("scenario start {} is not a snapshot date", spec.start)))?;
    if start + duration > states.len() {
        return Err(HciError::Config(format!(
            "scenario window of {duration} snapshots from {} runs past the last date",
            spec.start
        )));
    }
    let mut i = start;
    for phase in &phases {
        for _ in 0..phase.snapshots {
            let s = &mut out[i];
            for (f, m) in s.group_factor.iter_mut().zip(phase.group_multipliers) {
                *f *= m;
            }
            for (shape, m) in &phase.shape_multipliers {
                s.shape_factor[shape.ordinal()] *= m;
            }
            s.shape_mix_shift.extend(phase.volume_shifts.iter().copied());
            i += 1;
        }
    }
    Ok(out)
}
