//! Text checkpoints: a header, then one line per named matrix,
//! `<name> <rows> <cols> <row-major values...>`.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use super::config::TrainConfig;
use super::write_atomic;
use crate::encoder::{Activation, Model};
use crate::error::{Error, Result};
use crate::globalmem::{init_memory, GlobalMemory};
use crate::numcore::Dense2D;
use crate::seed::{self, stream};

const HEADER: &str = "oodgnn-checkpoint 1";

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub model: Model,
    pub memory: GlobalMemory,
}

impl Checkpoint {
    /// Freshly initialized model and memory for `cfg`.
    pub fn init(cfg: &TrainConfig, input_dim: usize, num_classes: usize) -> Result<Self> {
        cfg.validate()?;
        let mut rng = seed::rng(seed::derive(cfg.seed, stream::INIT, 0));
        let model = Model::init(input_dim, cfg.d, cfg.num_layers, num_classes, &mut rng)?;
        let memory = init_memory(cfg.memory.k, cfg.batch_size, cfg.d, &cfg.memory.gammas)?;
        Ok(Self { model, memory })
    }

    fn named(&self) -> Vec<(String, Dense2D)> {
        let mut out: Vec<(String, Dense2D)> =
            self.model.named_params().into_iter().map(|(n, p)| (n, p.clone())).collect();
        for (k, (z, w)) in self.memory.z_groups().iter().zip(self.memory.w_groups()).enumerate() {
            out.push((format!("memory.z.{k}"), z.clone()));
            out.push((format!("memory.w.{k}"), Dense2D::new(1, w.len(), w.clone()).expect("non-empty group")));
            out.push((format!("memory.gamma.{k}"), Dense2D::scalar(self.memory.gammas()[k])));
        }
        out
    }

    pub fn to_text(&self) -> String {
        let act = match self.model.encoder.activation {
            Activation::Relu => "relu",
            Activation::Identity => "identity",
        };
        let mut s = format!("{HEADER}\nactivation {act}\n");
        for (name, m) in self.named() {
            s.push_str(&format!("{name} {} {}", m.rows(), m.cols()));
            for v in m.values() {
                s.push_str(&format!(" {v:?}"));
            }
            s.push('\n');
        }
        s
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_atomic(path, self.to_text().as_bytes())
    }

    /// Reads values into a copy of `template`, which fixes the expected
    /// architecture. Every matrix must be present with the template's shape.
    pub fn from_text(text: &str, template: &Checkpoint) -> Result<Self> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let parse_err = |line: usize, message: String| Error::Parse { line: line + 1, message };
        match lines.next() {
            Some((_, l)) if l.trim() == HEADER => {}
            _ => return Err(parse_err(0, format!("missing header {HEADER:?}"))),
        }
        let activation = match lines.next() {
            Some((_, l)) if l.trim() == "activation relu" => Activation::Relu,
            Some((_, l)) if l.trim() == "activation identity" => Activation::Identity,
            Some((i, l)) => return Err(parse_err(i, format!("expected activation line, got {l:?}"))),
            None => return Err(parse_err(1, "missing activation line".into())),
        };
        let mut found: HashMap<String, Dense2D> = HashMap::new();
        for (i, line) in lines {
            let mut tok = line.split_whitespace();
            let name = tok.next().unwrap().to_string();
            let mut dim = || -> Result<usize> {
                tok.next()
                    .and_then(|t| t.parse().ok())
                    .ok_or_else(|| parse_err(i, format!("{name}: bad shape")))
            };
            let (rows, cols) = (dim()?, dim()?);
            let values = tok
                .map(|t| t.parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| parse_err(i, format!("{name}: {e}")))?;
            let m = Dense2D::new(rows, cols, values).map_err(|e| parse_err(i, format!("{name}: {e}")))?;
            if found.insert(name.clone(), m).is_some() {
                return Err(parse_err(i, format!("{name} appears twice")));
            }
        }

        let expected = template.named();
        let mut take = |name: &str, like: &Dense2D| -> Result<Dense2D> {
            let m = found.remove(name).ok_or_else(|| Error::Shape(format!("checkpoint lacks {name}")))?;
            if m.shape() != like.shape() {
                return Err(Error::dims("checkpoint", m.shape(), like.shape()));
            }
            Ok(m)
        };
        let mut model = template.model.clone();
        model.encoder.activation = activation;
        let names: Vec<String> = model.named_params().into_iter().map(|(n, _)| n).collect();
        for ((name, slot), (_, like)) in names.iter().zip(model.params_mut()).zip(&expected) {
            *slot = take(name, like)?;
        }
        let k = template.memory.k_groups();
        let mut z_groups = Vec::with_capacity(k);
        let mut w_groups = Vec::with_capacity(k);
        let mut gammas = Vec::with_capacity(k);
        let mem_like = &expected[names.len()..];
        for g in 0..k {
            z_groups.push(take(&format!("memory.z.{g}"), &mem_like[3 * g].1)?);
            w_groups.push(take(&format!("memory.w.{g}"), &mem_like[3 * g + 1].1)?.into_values());
            gammas.push(take(&format!("memory.gamma.{g}"), &mem_like[3 * g + 2].1)?.values()[0]);
        }
        if let Some(extra) = found.keys().next() {
            return Err(Error::Shape(format!("checkpoint has unexpected entry {extra}")));
        }
        let mut memory = init_memory(k, template.memory.batch_size(), template.memory.dims(), &gammas)?;
        memory.restore(z_groups, w_groups)?;
        Ok(Self { model, memory })
    }

    pub fn load(path: &Path, template: &Checkpoint) -> Result<Self> {
        Self::from_text(&fs::read_to_string(path)?, template)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::config::MemoryConfig;

    #[test]
    fn text_round_trip_is_exact() {
        let cfg = TrainConfig { d: 4, batch_size: 3, memory: MemoryConfig { k: 2, gammas: vec![0.5, 0.9] }, ..Default::default() };
        let mut ck = Checkpoint::init(&cfg, 5, 3).unwrap();
        let z = Dense2D::new(3, 4, (0..12).map(|i| (i as f64).sqrt() / 7.0).collect()).unwrap();
        ck.memory.momentum_update(&z, &[0.3, 1.1, 1.6]).unwrap();
        let template = Checkpoint::init(&TrainConfig { seed: 99, ..cfg.clone() }, 5, 3).unwrap();
        let back = Checkpoint::from_text(&ck.to_text(), &template).unwrap();
        assert_eq!(back, ck);
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let cfg = TrainConfig { d: 4, batch_size: 3, ..Default::default() };
        let ck = Checkpoint::init(&cfg, 5, 3).unwrap();
        let wider = Checkpoint::init(&TrainConfig { d: 6, ..cfg.clone() }, 5, 3).unwrap();
        assert!(Checkpoint::from_text(&ck.to_text(), &wider).is_err());
        let no_mem = Checkpoint::init(&TrainConfig { memory: MemoryConfig { k: 0, gammas: vec![] }, ..cfg }, 5, 3).unwrap();
        assert!(Checkpoint::from_text(&ck.to_text(), &no_mem).is_err());
        assert!(Checkpoint::from_text("garbage", &ck).is_err());
        let truncated: String = ck.to_text().lines().take(5).collect::<Vec<_>>().join("\n");
        assert!(Checkpoint::from_text(&truncated, &ck).is_err());
    }
}
