use std::sync::Arc;

use super::{spectra, FrameTruth, Rendering};
use crate::config::{GmmConfig, PipelineConfig};
use crate::geometry::ScanTables;
use crate::ssl::Localizer;
use crate::sst::Gmm;
use crate::{angle_between, Vec3};

/// SRP powers split by ground truth: candidates within `tolerance_deg` of
/// an active source are "active", every other candidate is "diffuse".
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PowerSamples {
    pub active: Vec<f64>,
    pub diffuse: Vec<f64>,
}

impl PowerSamples {
    pub fn extend(&mut self, other: PowerSamples) {
        self.active.extend(other.active);
        self.diffuse.extend(other.diffuse);
    }
}

/// Runs localization over a rendering and labels every potential DOA.
pub fn collect_powers(
    cfg: &PipelineConfig,
    tables: Arc<ScanTables>,
    rendering: &Rendering,
    truth: &[FrameTruth],
    tolerance_deg: f64,
) -> PowerSamples {
    let g = &cfg.general;
    let mut loc = Localizer::new(cfg, tables);
    let mut out = PowerSamples::default();
    for (f, t) in spectra(&rendering.mixture, g.fs_processing_hz, g.frame_size_samples, g.hop_size_samples)
        .iter()
        .zip(truth)
    {
        let active: Vec<Vec3> = t
            .sources
            .iter()
            .filter(|s| s.active)
            .map(|s| Vec3::from(s.direction))
            .collect();
        for d in loc.process(f) {
            let hit = active
                .iter()
                .any(|a| angle_between(a, &d.direction).to_degrees() <= tolerance_deg);
            if hit {
                out.active.push(d.power);
            } else {
                out.diffuse.push(d.power);
            }
        }
    }
    out
}

/// Two-component fits of both power distributions.
pub fn fit_power_models(samples: &PowerSamples) -> Option<(GmmConfig, GmmConfig)> {
    let a = Gmm::fit(&samples.active, 2, 300)?;
    let d = Gmm::fit(&samples.diffuse, 2, 300)?;
    Some((GmmConfig::from(&a), GmmConfig::from(&d)))
}
