//! Weight and FLOP accounting per train type.
//!
//! FLOP convention (forward pass, one multiply-accumulate = one FLOP):
//! conv layers cost `out_h * out_w * out_c * (k * k * in_c)`, dense layers
//! cost `(fan_in + 1) * fan_out` (bias counted as one extra input), so a
//! dense layer's FLOPs equal its weight count. Pooling, relu, split and the
//! dueling merge are counted as free.

use super::spec::{LayerKind, NetworkSpec, TrainType};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LayerCost {
    pub name: String,
    pub weights: u64,
    pub flops: u64,
    pub trainable: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FlopReport {
    pub train_type: TrainType,
    pub layers: Vec<LayerCost>,
    pub trainable_weights: u64,
    pub total_weights: u64,
    pub trainable_flops: u64,
    pub total_flops: u64,
    pub conv_flops: u64,
}

impl FlopReport {
    pub fn flop_ratio(&self) -> f64 {
        self.trainable_flops as f64 / self.total_flops as f64
    }

    pub fn weight_ratio(&self) -> f64 {
        self.trainable_weights as f64 / self.total_weights as f64
    }
}

/// Weight plus bias count over layers trainable under `tt`.
pub fn count_trainable_weights(spec: &NetworkSpec, tt: TrainType) -> u64 {
    let masked = spec.clone().with_train_type(tt);
    masked.layers.iter().filter(|l| l.trainable).map(|l| l.kind.weight_count()).sum()
}

pub fn count_flops(spec: &NetworkSpec, tt: TrainType) -> FlopReport {
    let masked = spec.clone().with_train_type(tt);
    let shapes = masked.resolve().expect("spec validated at construction");
    let layers: Vec<LayerCost> = masked
        .layers
        .iter()
        .zip(&shapes)
        .map(|(l, s)| {
            let flops = match l.kind {
                LayerKind::Conv2d { kernel, in_channels, .. } => {
                    (s.output[0] * s.output[1] * s.output[2]) as u64 * (kernel * kernel * in_channels) as u64
                }
                LayerKind::Dense { fan_in, fan_out } => (fan_in as u64 + 1) * fan_out as u64,
                _ => 0,
            };
            LayerCost {
                name: l.name.clone(),
                weights: l.kind.weight_count(),
                flops,
                trainable: l.trainable && l.kind.has_weights(),
            }
        })
        .collect();
    let sum = |f: &dyn Fn(&LayerCost) -> u64| layers.iter().map(f).sum::<u64>();
    let conv_flops = masked
        .layers
        .iter()
        .zip(&layers)
        .filter(|(l, _)| matches!(l.kind, LayerKind::Conv2d { .. }))
        .map(|(_, c)| c.flops)
        .sum();
    FlopReport {
        train_type: tt,
        trainable_weights: sum(&|c| if c.trainable { c.weights } else { 0 }),
        total_weights: sum(&|c| c.weights),
        trainable_flops: sum(&|c| if c.trainable { c.flops } else { 0 }),
        total_flops: sum(&|c| c.flops),
        conv_flops,
        layers,
    }
}

/// `100 * part / total` truncated (not rounded) to two decimals.
pub fn percent_truncated(part: u64, total: u64) -> f64 {
    let hundredths = (part as u128 * 10_000) / total as u128;
    hundredths as f64 / 100.0
}

/// Three significant figures, truncated, with a K/M/G suffix (e.g. `7.35M`).
pub fn si_truncated(n: u64) -> String {
    let (scale, suffix) = match n {
        0..=999 => return n.to_string(),
        1_000..=999_999 => (1_000u64, "K"),
        1_000_000..=999_999_999 => (1_000_000, "M"),
        _ => (1_000_000_000, "G"),
    };
    let digits = (n / scale).to_string().len();
    let decimals = 3usize.saturating_sub(digits);
    let unit = scale / 10u64.pow(decimals as u32);
    let kept = n / unit;
    let int = kept / 10u64.pow(decimals as u32);
    let frac = kept % 10u64.pow(decimals as u32);
    if decimals == 0 {
        format!("{int}{suffix}")
    } else {
        format!("{int}.{frac:0width$}{suffix}", width = decimals)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::spec::build_desk_network;

    #[test]
    fn si_formatting() {
        assert_eq!(si_truncated(7_358_490), "7.35M");
        assert_eq!(si_truncated(1_062_938), "1.06M");
        assert_eq!(si_truncated(48_858_522), "48.8M");
        assert_eq!(si_truncated(1_234_567_890), "1.23G");
        assert_eq!(si_truncated(512), "512");
        assert_eq!(si_truncated(999_999), "999K");
    }

    #[test]
    fn percent_truncates() {
        assert_eq!(percent_truncated(1, 3), 33.33);
        assert_eq!(percent_truncated(2, 3), 66.66);
        assert_eq!(percent_truncated(5, 5), 100.0);
    }

    #[test]
    fn desk_e2e_counts_everything() {
        let spec = build_desk_network(64, 64, 25).unwrap();
        let r = count_flops(&spec, TrainType::E2e);
        assert_eq!(r.trainable_weights, r.total_weights);
        assert_eq!(r.trainable_flops, r.total_flops);
        assert!(count_trainable_weights(&spec, TrainType::Last2) < count_trainable_weights(&spec, TrainType::Last3));
    }
}
