use ndarray::Array2;
use rand::Rng as _;

use crate::config::LoraConfig;
use crate::params::Param;
use crate::transformer::{Adapter, Model};
use crate::{ModelError, Result};

pub(crate) fn apply(model: &mut Model, config: &LoraConfig, seed: u64) -> Result<()> {
    config.validate()?;
    if model.lora.is_some() {
        return Err(ModelError::Lora("adapters are already attached".into()));
    }
    for p in model.store.iter_mut() {
        p.frozen = true;
    }
    let mut rng = diglossia_core::rng::stream(seed, diglossia_core::rng::label("lora"));
    let r = config.rank;
    let mut targets = config.targets.clone();
    targets.sort();
    targets.dedup();
    for li in 0..model.layers.len() {
        for &target in &targets {
            let (name, w) = {
                let lin = model.layers[li].linear_mut(target);
                (lin.name.clone(), lin.w)
            };
            let (fan_in, fan_out) = model.store.get(w).value.dim();
            // uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) for A, zeros for B
            let bound = 1.0 / (fan_in as f64).sqrt();
            let a_val = Array2::from_shape_simple_fn((fan_in, r), || rng.random_range(-bound..bound));
            let a = model.store.push(Param::new(format!("{name}.lora_a"), a_val, false));
            let b = model.store.push(Param::new(
                format!("{name}.lora_b"),
                Array2::zeros((r, fan_out)),
                false,
            ));
            model.layers[li].linear_mut(target).adapter = Some(Adapter {
                a,
                b,
                scale: config.scale(),
                dropout: config.dropout,
            });
        }
    }
    model.lora = Some(config.clone());
    model.merged = false;
    Ok(())
}

pub(crate) fn merge(model: &mut Model) -> Result<()> {
    if model.merged {
        return Err(ModelError::Lora("adapters were already merged".into()));
    }
    if model.lora.is_none() {
        return Err(ModelError::Lora("no adapters to merge".into()));
    }
    for li in 0..model.layers.len() {
        for target in crate::config::LoraTarget::ALL {
            let lin = model.layers[li].linear_mut(target).clone();
            if let Some(ad) = lin.adapter {
                let delta = model.store.get(ad.a).value.dot(&model.store.get(ad.b).value) * ad.scale;
                model.store.params[lin.w].value += &delta;
                model.layers[li].linear_mut(target).adapter = None;
            }
        }
    }
    model.store.params.retain(|p| !p.name.ends_with(".lora_a") && !p.name.ends_with(".lora_b"));
    for p in model.store.iter_mut() {
        p.frozen = false;
    }
    model.lora = None;
    model.merged = true;
    Ok(())
}
