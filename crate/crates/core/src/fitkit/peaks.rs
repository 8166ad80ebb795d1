use serde::{Deserialize, Serialize};

use crate::spectrum::Spectrum;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeakOptions {
    pub min_prominence: f64,
    /// Minimum distance between kept peaks, in axis units.
    pub min_separation: f64,
    /// Moving-average window in points (odd; 1 disables smoothing).
    pub window: usize,
}

impl PeakOptions {
    pub fn new(min_prominence: f64, min_separation: f64) -> Self {
        PeakOptions {
            min_prominence,
            min_separation,
            window: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectedPeak {
    pub index: usize,
    pub center: f64,
    /// Smoothed value at the maximum.
    pub height: f64,
    pub prominence: f64,
    /// Full width at half prominence, in axis units.
    pub width: f64,
}

/// Local maxima of the 3-point smoothed spectrum, sorted by center.
pub fn detect_peaks(spectrum: &Spectrum, min_prominence: f64, min_separation: f64) -> Vec<DetectedPeak> {
    detect_peaks_with(&spectrum.axis, &spectrum.values, &PeakOptions::new(min_prominence, min_separation))
}

pub fn detect_peaks_with(axis: &[f64], values: &[f64], opts: &PeakOptions) -> Vec<DetectedPeak> {
    let n = axis.len().min(values.len());
    if n < 3 {
        return Vec::new();
    }
    let s = smooth(&values[..n], opts.window.max(1));

    let mut candidates = Vec::new();
    let mut i = 1;
    while i < n - 1 {
        if s[i] > s[i - 1] {
            // walk across a plateau
            let mut j = i;
            while j + 1 < n && s[j + 1] == s[i] {
                j += 1;
            }
            if j + 1 < n && s[j + 1] < s[i] {
                candidates.push((i + j) / 2);
            }
            i = j + 1;
        } else {
            i += 1;
        }
    }

    let mut peaks: Vec<DetectedPeak> = candidates
        .into_iter()
        .map(|p| {
            let prominence = prominence(&s, p);
            DetectedPeak {
                index: p,
                center: axis[p],
                height: s[p],
                prominence,
                width: half_width(axis, &s, p, s[p] - 0.5 * prominence),
            }
        })
        .filter(|p| p.prominence >= opts.min_prominence && p.prominence > 0.0)
        .collect();

    peaks.sort_by(|a, b| b.prominence.total_cmp(&a.prominence).then(a.index.cmp(&b.index)));
    let mut kept: Vec<DetectedPeak> = Vec::new();
    for p in peaks {
        if kept.iter().all(|k| (k.center - p.center).abs() >= opts.min_separation) {
            kept.push(p);
        }
    }
    kept.sort_by(|a, b| a.center.total_cmp(&b.center));
    kept
}

fn smooth(values: &[f64], window: usize) -> Vec<f64> {
    let h = window / 2;
    let n = values.len();
    (0..n)
        .map(|i| {
            let lo = i.saturating_sub(h);
            let hi = (i + h).min(n - 1);
            values[lo..=hi].iter().sum::<f64>() / (hi - lo + 1) as f64
        })
        .collect()
}

/// Height above the higher of the two minima reached before the signal
/// climbs past the peak on either side.
fn prominence(s: &[f64], p: usize) -> f64 {
    let top = s[p];
    let mut left_min = top;
    for &v in s[..p].iter().rev() {
        if v > top {
            break;
        }
        left_min = left_min.min(v);
    }
    let mut right_min = top;
    for &v in &s[p + 1..] {
        if v > top {
            break;
        }
        right_min = right_min.min(v);
    }
    top - left_min.max(right_min)
}

fn half_width(axis: &[f64], s: &[f64], p: usize, level: f64) -> f64 {
    let cross = |a: usize, b: usize| {
        let t = (level - s[a]) / (s[b] - s[a]);
        axis[a] + t * (axis[b] - axis[a])
    };
    let mut left = axis[0];
    for i in (0..p).rev() {
        if s[i] <= level {
            left = cross(i, i + 1);
            break;
        }
    }
    let mut right = axis[s.len() - 1];
    for i in p + 1..s.len() {
        if s[i] <= level {
            right = cross(i, i - 1);
            break;
        }
    }
    right - left
}
