use rand::Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};

use super::{PipelineConfig, RngStream, SimError};

/// One synthetic transaction before it enters the pipeline.
#[derive(Debug, Clone, PartialEq)]
pub struct StreamRecord {
    pub latent_label: bool,
    pub clean_features: Vec<f64>,
}

/// Deterministic in the seed. Every record consumes the same number of
/// draws, so pinned records leave the rest of the stream unchanged.
pub fn generate_stream(config: &PipelineConfig) -> Result<Vec<StreamRecord>, SimError> {
    config.validate()?;
    let mut rng = RngStream::Data.rng(config.seed);
    let [intercept, loading, shift] = config.activity_params;
    let mut out = Vec::with_capacity(config.event_count);
    for _ in 0..config.event_count {
        let label = rng.random::<f64>() < config.base_rate;
        let y = if label { 1.0 } else { 0.0 };
        let z: f64 = StandardNormal.sample(&mut rng);
        let rate = (intercept + loading * z + shift * y).exp();
        let count: f64 = Poisson::new(rate).map_or(0.0, |p| p.sample(&mut rng));
        let mut features = Vec::with_capacity(config.feature_count);
        features.push(count);
        for (l, s) in config.factor_loadings.iter().zip(&config.label_shifts) {
            let noise: f64 = StandardNormal.sample(&mut rng);
            features.push(l * z + s * y + noise);
        }
        out.push(StreamRecord {
            latent_label: label,
            clean_features: features,
        });
    }
    for pin in &config.pinned {
        out[pin.index] = StreamRecord {
            latent_label: pin.latent_label,
            clean_features: pin.features.clone(),
        };
    }
    Ok(out)
}
