//! Cross-molecule comparison of fitted vibronic modes.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{read_text, PipeError};
use crate::levels::ElectronicState;

/// Default clustering window in cm⁻¹.
pub const DEFAULT_MATCH_WINDOW: f64 = 2.0;
/// Largest S0/S1 mean difference (cm⁻¹) for two clusters to count as one mode.
pub const DEFAULT_PAIR_WINDOW: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModeFit {
    pub wavenumber_cm1: f64,
    pub gamma_ghz: f64,
    pub relative_omega2: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Provenance {
    #[serde(default)]
    pub source_files: Vec<String>,
    /// Laser powers by name, e.g. `pump_nw`.
    #[serde(default)]
    pub powers: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MoleculeRecord {
    pub molecule_id: String,
    pub sample_id: String,
    #[serde(default)]
    pub s0_modes: Vec<ModeFit>,
    #[serde(default)]
    pub s1_modes: Vec<ModeFit>,
    #[serde(default)]
    pub provenance: Provenance,
}

impl MoleculeRecord {
    pub fn modes(&self, state: ElectronicState) -> &[ModeFit] {
        match state {
            ElectronicState::S0 => &self.s0_modes,
            ElectronicState::S1 => &self.s1_modes,
        }
    }

    /// Rescales relative Ω² so the strongest mode of each state is 1.
    pub fn normalize(&mut self) {
        for modes in [&mut self.s0_modes, &mut self.s1_modes] {
            let max = modes.iter().map(|m| m.relative_omega2).fold(0.0, f64::max);
            if max > 0.0 {
                modes.iter_mut().for_each(|m| m.relative_omega2 /= max);
            }
        }
    }

    fn check(&self, index: usize) -> Result<(), PipeError> {
        for (name, modes) in [("s0_modes", &self.s0_modes), ("s1_modes", &self.s1_modes)] {
            for (j, m) in modes.iter().enumerate() {
                let path = |field: &str| format!("[{index}].{name}[{j}].{field}");
                if !(m.wavenumber_cm1 > 0.0 && m.wavenumber_cm1.is_finite()) {
                    return Err(PipeError::Schema {
                        path: path("wavenumber_cm1"),
                        message: "must be finite and > 0".into(),
                    });
                }
                if !(m.gamma_ghz >= 0.0 && m.gamma_ghz.is_finite()) {
                    return Err(PipeError::Schema {
                        path: path("gamma_ghz"),
                        message: "must be finite and >= 0".into(),
                    });
                }
                if !(0.0..=1.0).contains(&m.relative_omega2) {
                    return Err(PipeError::Schema {
                        path: path("relative_omega2"),
                        message: "must lie in [0, 1]".into(),
                    });
                }
            }
            if !modes.is_empty() && modes.iter().all(|m| m.relative_omega2 != 1.0) {
                return Err(PipeError::Schema {
                    path: format!("[{index}].{name}"),
                    message: "relative_omega2 must be normalized to a maximum of 1".into(),
                });
            }
        }
        Ok(())
    }
}

pub fn records_from_json(text: &str) -> Result<Vec<MoleculeRecord>, PipeError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let records: Vec<MoleculeRecord> = serde_path_to_error::deserialize(de).map_err(|e| PipeError::Schema {
        path: e.path().to_string(),
        message: e.inner().to_string(),
    })?;
    let mut ids = std::collections::HashSet::new();
    for (i, r) in records.iter().enumerate() {
        r.check(i)?;
        if !ids.insert(r.molecule_id.as_str()) {
            return Err(PipeError::Schema {
                path: format!("[{i}].molecule_id"),
                message: format!("duplicate molecule_id `{}`", r.molecule_id),
            });
        }
    }
    Ok(records)
}

pub fn read_records(path: &Path) -> Result<Vec<MoleculeRecord>, PipeError> {
    records_from_json(&read_text(path)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterMember {
    pub molecule_id: String,
    pub mode: ModeFit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeCluster {
    pub state: ElectronicState,
    /// Members sorted by molecule id.
    pub members: Vec<ClusterMember>,
}

impl ModeCluster {
    pub fn mean_wavenumber(&self) -> f64 {
        mean(self.members.iter().map(|m| m.mode.wavenumber_cm1))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeGroups {
    pub state: ElectronicState,
    pub window: f64,
    /// Sorted by mean wavenumber.
    pub clusters: Vec<ModeCluster>,
    /// Modes no other molecule shares.
    pub unmatched: Vec<ClusterMember>,
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    sum / n as f64
}

/// Groups the modes of one electronic state across molecules.
///
/// Records are visited in molecule-id order, starting with the one that has
/// the most modes; each of its modes opens a cluster. Every later record
/// assigns its modes to clusters one-to-one, closest pairs first, provided
/// the distance to the cluster mean is at most `window`; leftovers open new
/// clusters.
pub fn match_modes(records: &[MoleculeRecord], state: ElectronicState, window: f64) -> Result<ModeGroups, PipeError> {
    if !(window > 0.0 && window.is_finite()) {
        return Err(PipeError::Argument(format!("match window must be > 0, got {window}")));
    }
    let mut order: Vec<&MoleculeRecord> = records.iter().collect();
    order.sort_by(|a, b| a.molecule_id.cmp(&b.molecule_id));
    if let Some(seed) = (0..order.len()).max_by(|&a, &b| order[a].modes(state).len().cmp(&order[b].modes(state).len()).then(b.cmp(&a))) {
        let r = order.remove(seed);
        order.insert(0, r);
    }

    let mut clusters: Vec<ModeCluster> = Vec::new();
    for record in order {
        let means: Vec<f64> = clusters.iter().map(ModeCluster::mean_wavenumber).collect();
        let modes = record.modes(state);
        let mut pairs: Vec<(f64, usize, usize)> = Vec::new();
        for (mi, m) in modes.iter().enumerate() {
            for (ci, c) in means.iter().enumerate() {
                let d = (m.wavenumber_cm1 - c).abs();
                if d <= window {
                    pairs.push((d, ci, mi));
                }
            }
        }
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
        let mut mode_used = vec![false; modes.len()];
        let mut cluster_used = vec![false; means.len()];
        for (_, ci, mi) in pairs {
            if !mode_used[mi] && !cluster_used[ci] {
                mode_used[mi] = true;
                cluster_used[ci] = true;
                clusters[ci].members.push(ClusterMember {
                    molecule_id: record.molecule_id.clone(),
                    mode: modes[mi],
                });
            }
        }
        for (mi, m) in modes.iter().enumerate() {
            if !mode_used[mi] {
                clusters.push(ModeCluster {
                    state,
                    members: vec![ClusterMember {
                        molecule_id: record.molecule_id.clone(),
                        mode: *m,
                    }],
                });
            }
        }
    }
    for c in &mut clusters {
        c.members.sort_by(|a, b| a.molecule_id.cmp(&b.molecule_id));
    }
    clusters.sort_by(|a, b| a.mean_wavenumber().total_cmp(&b.mean_wavenumber()));
    let unmatched = clusters.iter().filter(|c| c.members.len() == 1).map(|c| c.members[0].clone()).collect();
    Ok(ModeGroups {
        state,
        window,
        clusters,
        unmatched,
    })
}

/// Per-state statistics of one matched mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateStats {
    pub molecule_ids: Vec<String>,
    pub mean_wavenumber: f64,
    pub wavenumber_deviations: Vec<f64>,
    /// max − min over molecules.
    pub wavenumber_spread: f64,
    pub mean_gamma: f64,
    pub gamma_deviations: Vec<f64>,
    pub gamma_spread: f64,
    pub mean_omega2: f64,
    pub omega2_deviations: Vec<f64>,
}

fn spread(values: &[f64]) -> f64 {
    let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
    max - min
}

fn deviations(values: &[f64]) -> (f64, Vec<f64>) {
    let m = mean(values.iter().copied());
    (m, values.iter().map(|v| v - m).collect())
}

impl StateStats {
    fn of(cluster: &ModeCluster) -> Self {
        let w: Vec<f64> = cluster.members.iter().map(|m| m.mode.wavenumber_cm1).collect();
        let g: Vec<f64> = cluster.members.iter().map(|m| m.mode.gamma_ghz).collect();
        let o: Vec<f64> = cluster.members.iter().map(|m| m.mode.relative_omega2).collect();
        let (mean_wavenumber, wavenumber_deviations) = deviations(&w);
        let (mean_gamma, gamma_deviations) = deviations(&g);
        let (mean_omega2, omega2_deviations) = deviations(&o);
        StateStats {
            molecule_ids: cluster.members.iter().map(|m| m.molecule_id.clone()).collect(),
            mean_wavenumber,
            wavenumber_deviations,
            wavenumber_spread: spread(&w),
            mean_gamma,
            gamma_deviations,
            gamma_spread: spread(&g),
            mean_omega2,
            omega2_deviations,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeStats {
    /// Nominal wavenumber: the S0 mean if present, else the S1 mean, rounded to 0.1 cm⁻¹.
    pub mode_label: f64,
    pub s0: Option<StateStats>,
    pub s1: Option<StateStats>,
    pub s0_minus_s1_wavenumber: Option<f64>,
}

/// A cluster whose statistics were suppressed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Flag {
    pub state: ElectronicState,
    pub wavenumber_cm1: f64,
    pub molecule_ids: Vec<String>,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsSummary {
    /// Mean over modes of the S0 wavenumber spread, cm⁻¹.
    pub mean_wavenumber_spread_s0: Option<f64>,
    pub mean_wavenumber_spread_s1: Option<f64>,
    /// Mean over every per-state mode statistic, cm⁻¹.
    pub mean_wavenumber_spread: Option<f64>,
    /// Mean over every per-state mode statistic, GHz.
    pub mean_gamma_spread: Option<f64>,
    pub modes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsReport {
    pub modes: Vec<ModeStats>,
    pub flagged: Vec<Flag>,
    pub summary: StatsSummary,
}

fn optional_mean(values: &[f64]) -> Option<f64> {
    (!values.is_empty()).then(|| mean(values.iter().copied()))
}

/// Means, signed deviations and spreads of every cluster with at least two
/// members, with S0 and S1 clusters paired by nearest mean within
/// `pair_window`. Singleton clusters are listed under `flagged`.
pub fn mode_statistics(s0: &ModeGroups, s1: &ModeGroups, pair_window: f64) -> Result<StatsReport, PipeError> {
    if !(pair_window >= 0.0 && pair_window.is_finite()) {
        return Err(PipeError::Argument(format!("pair window must be >= 0, got {pair_window}")));
    }
    let mut flagged = Vec::new();
    let mut usable = |groups: &ModeGroups| -> Vec<StateStats> {
        let mut out = Vec::new();
        for c in &groups.clusters {
            if c.members.len() < 2 {
                flagged.push(Flag {
                    state: c.state,
                    wavenumber_cm1: c.mean_wavenumber(),
                    molecule_ids: c.members.iter().map(|m| m.molecule_id.clone()).collect(),
                    reason: "singleton cluster".into(),
                });
            } else {
                out.push(StateStats::of(c));
            }
        }
        out
    };
    let ground = usable(s0);
    let excited = usable(s1);

    let mut pairs: Vec<(f64, usize, usize)> = Vec::new();
    for (i, g) in ground.iter().enumerate() {
        for (j, e) in excited.iter().enumerate() {
            let d = (g.mean_wavenumber - e.mean_wavenumber).abs();
            if d <= pair_window {
                pairs.push((d, i, j));
            }
        }
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut g_partner: Vec<Option<usize>> = vec![None; ground.len()];
    let mut e_taken = vec![false; excited.len()];
    for (_, i, j) in pairs {
        if g_partner[i].is_none() && !e_taken[j] {
            g_partner[i] = Some(j);
            e_taken[j] = true;
        }
    }

    let mut modes: Vec<ModeStats> = Vec::new();
    for (i, g) in ground.iter().enumerate() {
        let e = g_partner[i].map(|j| excited[j].clone());
        modes.push(ModeStats {
            mode_label: (g.mean_wavenumber * 10.0).round() / 10.0,
            s0_minus_s1_wavenumber: e.as_ref().map(|e| g.mean_wavenumber - e.mean_wavenumber),
            s0: Some(g.clone()),
            s1: e,
        });
    }
    for (j, e) in excited.iter().enumerate() {
        if !e_taken[j] {
            modes.push(ModeStats {
                mode_label: (e.mean_wavenumber * 10.0).round() / 10.0,
                s0: None,
                s1: Some(e.clone()),
                s0_minus_s1_wavenumber: None,
            });
        }
    }
    modes.sort_by(|a, b| a.mode_label.total_cmp(&b.mode_label));

    let s0_spreads: Vec<f64> = ground.iter().map(|s| s.wavenumber_spread).collect();
    let s1_spreads: Vec<f64> = excited.iter().map(|s| s.wavenumber_spread).collect();
    let all: Vec<f64> = s0_spreads.iter().chain(&s1_spreads).copied().collect();
    let gammas: Vec<f64> = ground.iter().chain(&excited).map(|s| s.gamma_spread).collect();
    let summary = StatsSummary {
        mean_wavenumber_spread_s0: optional_mean(&s0_spreads),
        mean_wavenumber_spread_s1: optional_mean(&s1_spreads),
        mean_wavenumber_spread: optional_mean(&all),
        mean_gamma_spread: optional_mean(&gammas),
        modes: modes.len(),
    };
    Ok(StatsReport { modes, flagged, summary })
}

/// One line of the plot-ready CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlotRow {
    pub mode_label: f64,
    pub state: ElectronicState,
    pub molecule_id: String,
    pub wavenumber_deviation_cm1: f64,
    pub gamma_ghz: f64,
    pub gamma_deviation_ghz: f64,
    pub relative_omega2: f64,
    pub omega2_deviation: f64,
}

/// Rows sorted by molecule id, then mode label.
pub fn plot_rows(report: &StatsReport) -> Vec<PlotRow> {
    let mut rows = Vec::new();
    for m in &report.modes {
        for (state, stats) in [(ElectronicState::S0, &m.s0), (ElectronicState::S1, &m.s1)] {
            let Some(s) = stats else { continue };
            for (k, id) in s.molecule_ids.iter().enumerate() {
                rows.push(PlotRow {
                    mode_label: m.mode_label,
                    state,
                    molecule_id: id.clone(),
                    wavenumber_deviation_cm1: s.wavenumber_deviations[k],
                    gamma_ghz: s.mean_gamma + s.gamma_deviations[k],
                    gamma_deviation_ghz: s.gamma_deviations[k],
                    relative_omega2: s.mean_omega2 + s.omega2_deviations[k],
                    omega2_deviation: s.omega2_deviations[k],
                });
            }
        }
    }
    rows.sort_by(|a, b| {
        a.molecule_id
            .cmp(&b.molecule_id)
            .then(a.mode_label.total_cmp(&b.mode_label))
            .then((a.state as u8).cmp(&(b.state as u8)))
    });
    rows
}
