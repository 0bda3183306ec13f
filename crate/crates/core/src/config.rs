//! Experiment configuration: defaults, the flat `key = value` config file
//! format, and CLI-style overrides. Unknown keys are rejected so typos
//! fail loudly instead of silently running the defaults.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::brb::{BrbConfig, BrbVariant};
use crate::data::{AugmentConfig, ImageGeometry, LabelColumn};
use crate::error::{Error, Result};
use crate::objectives::{Algorithm, LossWeights};
use crate::recluster::{ReclusterAlgorithm, ReclusterConfig};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum DatasetSpec {
    Csv {
        path: PathBuf,
        label_column: LabelColumn,
        geometry: Option<ImageGeometry>,
    },
    Blobs {
        k: usize,
        per_cluster: usize,
        dim: usize,
        separation: f64,
        spread: f64,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AugmentMode {
    /// Image datasets get the simplified-affine defaults during the
    /// clustering phase; geometry-free data gets no augmentation.
    Auto,
    On,
    Off,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub name: String,
    pub dataset: DatasetSpec,
    pub algorithm: Algorithm,
    /// 1 = reconstruction pretraining then clustering, 2 = from scratch.
    pub scenario: u8,
    pub seed: u64,
    /// Cluster count; None derives it from the labels.
    pub k: Option<usize>,
    /// Embedding width; None applies the "embedding size = #clusters"
    /// policy.
    pub embedding_dim: Option<usize>,
    pub hidden: Vec<usize>,
    pub lr: f64,
    pub batch_size: usize,
    pub pretrain_epochs: usize,
    pub clustering_epochs: usize,
    /// None uses the algorithm's default loss weights.
    pub lambda_ssl: Option<f64>,
    pub lambda_cluster: Option<f64>,
    /// Global gradient-norm clip; None disables clipping.
    pub grad_clip: Option<f64>,
    pub augment: AugmentMode,
    pub augment_translate_px: Option<usize>,
    pub augment_rotate_deg: Option<f64>,
    pub augment_jitter_std: Option<f64>,
    pub variant: BrbVariant,
    pub alpha: f64,
    pub interval: usize,
    pub reset_embedding: bool,
    pub reset_decoder: bool,
    pub reset_momentum: bool,
    pub reset_network_moments: bool,
    pub noise_beta: f64,
    pub recluster_algorithm: ReclusterAlgorithm,
    pub recluster_max_iters: usize,
    pub recluster_tol: f64,
    pub subsample_size: usize,
    pub eval_every: usize,
    pub eval_cd_every: usize,
    pub eval_subsample: usize,
    pub out: Option<PathBuf>,
    pub export_embeddings: Option<PathBuf>,
    pub save_params: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            name: "experiment".into(),
            dataset: DatasetSpec::Blobs { k: 5, per_cluster: 200, dim: 10, separation: 3.0, spread: 1.0 },
            algorithm: Algorithm::Dec,
            scenario: 2,
            seed: 0,
            k: None,
            embedding_dim: None,
            hidden: vec![1024, 512, 256],
            lr: 1e-3,
            batch_size: 256,
            pretrain_epochs: 250,
            clustering_epochs: 400,
            lambda_ssl: None,
            lambda_cluster: None,
            grad_clip: None,
            augment: AugmentMode::Auto,
            augment_translate_px: None,
            augment_rotate_deg: None,
            augment_jitter_std: None,
            variant: BrbVariant::Off,
            alpha: 0.8,
            interval: 20,
            reset_embedding: false,
            reset_decoder: false,
            reset_momentum: true,
            reset_network_moments: false,
            noise_beta: 0.3,
            recluster_algorithm: ReclusterAlgorithm::Kmeans,
            recluster_max_iters: 300,
            recluster_tol: 1e-6,
            subsample_size: 10_000,
            eval_every: 1,
            eval_cd_every: 5,
            eval_subsample: 5000,
            out: None,
            export_embeddings: None,
            save_params: None,
        }
    }
}

impl ExperimentConfig {
    /// Effective loss weights.
    pub fn weights(&self) -> LossWeights {
        let d = self.algorithm.default_weights();
        LossWeights {
            ssl: self.lambda_ssl.unwrap_or(d.ssl),
            cluster: self.lambda_cluster.unwrap_or(d.cluster),
        }
    }

    /// Pretraining epochs after applying the scenario: scenario 2 trains
    /// from scratch.
    pub fn effective_pretrain_epochs(&self) -> usize {
        if self.scenario == 2 {
            0
        } else {
            self.pretrain_epochs
        }
    }

    pub fn brb_config(&self, k: usize) -> BrbConfig {
        BrbConfig {
            variant: self.variant,
            alpha: self.alpha,
            interval: self.interval,
            reset_embedding_layer: self.reset_embedding,
            reset_decoder: self.reset_decoder,
            momentum_reset: self.reset_momentum,
            reset_network_moments: self.reset_network_moments,
            noise_beta: self.noise_beta,
            recluster: ReclusterConfig {
                algorithm: self.recluster_algorithm,
                k,
                max_iters: self.recluster_max_iters,
                tol: self.recluster_tol,
                subsample: self.subsample_size,
            },
        }
    }

    /// Augmentation for the clustering phase given the dataset geometry.
    pub fn augment_config(&self, geometry: Option<&ImageGeometry>) -> AugmentConfig {
        let base = match (self.augment, geometry) {
            (AugmentMode::Off, _) => AugmentConfig::default(),
            (AugmentMode::Auto, None) => AugmentConfig::default(),
            (AugmentMode::Auto, Some(g)) | (AugmentMode::On, Some(g)) => AugmentConfig::image_default(g),
            (AugmentMode::On, None) => AugmentConfig {
                enabled: true,
                max_translate_px: 0,
                max_rotate_deg: 0.0,
                jitter_std: 0.0,
            },
        };
        let mut cfg = base;
        if let Some(t) = self.augment_translate_px {
            cfg.max_translate_px = t;
        }
        if let Some(r) = self.augment_rotate_deg {
            cfg.max_rotate_deg = r;
        }
        if let Some(j) = self.augment_jitter_std {
            cfg.jitter_std = j;
        }
        cfg
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.scenario == 1 || self.scenario == 2) {
            return Err(Error::Config(format!("scenario must be 1 or 2, got {}", self.scenario)));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be >= 1".into()));
        }
        if self.clustering_epochs == 0 {
            return Err(Error::Config("clustering_epochs must be >= 1".into()));
        }
        if !(self.lr > 0.0) {
            return Err(Error::Config("lr must be positive".into()));
        }
        if self.eval_every == 0 || self.eval_cd_every == 0 {
            return Err(Error::Config("evaluation cadences must be >= 1".into()));
        }
        if self.eval_subsample == 0 {
            return Err(Error::Config("eval_subsample must be >= 1".into()));
        }
        if let Some(c) = self.grad_clip {
            if !(c > 0.0) {
                return Err(Error::Config("grad_clip must be positive when set".into()));
            }
        }
        if let (Some(s), Some(c)) = (self.lambda_ssl, self.lambda_cluster) {
            if s < 0.0 || c < 0.0 {
                return Err(Error::Config("loss weights must be nonnegative".into()));
            }
        }
        // BRB numeric checks that do not need k
        self.brb_config(self.k.unwrap_or(1).max(1)).validate()?;
        if let DatasetSpec::Csv { geometry: Some(g), .. } = &self.dataset {
            if g.pixels() == 0 {
                return Err(Error::Config("image geometry must be nonempty".into()));
            }
        }
        Ok(())
    }

    /// Parse a flat `key = value` config file (`#` starts a comment line).
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut cfg = ExperimentConfig::default();
        cfg.apply_pairs(parse_pairs(&text)?)?;
        Ok(cfg)
    }

    pub fn apply_overrides(&mut self, overrides: &[(String, String)]) -> Result<()> {
        let pairs: Vec<(usize, String, String)> = overrides
            .iter()
            .map(|(k, v)| (0usize, k.clone(), v.clone()))
            .collect();
        self.apply_pairs(pairs)
    }

    fn apply_pairs(&mut self, pairs: Vec<(usize, String, String)>) -> Result<()> {
        // dataset assembly keys are gathered first
        let mut map: BTreeMap<String, (usize, String)> = BTreeMap::new();
        for (line, key, value) in pairs {
            map.insert(key, (line, value));
        }
        let take = |map: &mut BTreeMap<String, (usize, String)>, key: &str| map.remove(key).map(|(_, v)| v);

        if let Some(ds) = take(&mut map, "dataset") {
            if ds == "blobs" {
                let mut k = 5;
                let mut per = 200;
                let mut dim = 10;
                let mut sep = 3.0;
                let mut spread = 1.0;
                if let Some(v) = take(&mut map, "blobs_k") {
                    k = parse_num(&v, "blobs_k")?;
                }
                if let Some(v) = take(&mut map, "blobs_per_cluster") {
                    per = parse_num(&v, "blobs_per_cluster")?;
                }
                if let Some(v) = take(&mut map, "blobs_dim") {
                    dim = parse_num(&v, "blobs_dim")?;
                }
                if let Some(v) = take(&mut map, "blobs_separation") {
                    sep = parse_float(&v, "blobs_separation")?;
                }
                if let Some(v) = take(&mut map, "blobs_spread") {
                    spread = parse_float(&v, "blobs_spread")?;
                }
                self.dataset = DatasetSpec::Blobs { k, per_cluster: per, dim, separation: sep, spread };
            } else {
                let label_column = match take(&mut map, "label_column").as_deref() {
                    None | Some("last") => LabelColumn::Last,
                    Some("none") => LabelColumn::None,
                    Some(other) => {
                        return Err(Error::Config(format!("label_column must be 'last' or 'none', got '{other}'")))
                    }
                };
                let h = take(&mut map, "image_height");
                let w = take(&mut map, "image_width");
                let c = take(&mut map, "image_channels");
                let geometry = match (h, w) {
                    (Some(h), Some(w)) => Some(ImageGeometry {
                        height: parse_num(&h, "image_height")?,
                        width: parse_num(&w, "image_width")?,
                        channels: c.map(|v| parse_num(&v, "image_channels")).transpose()?.unwrap_or(1),
                    }),
                    (None, None) => None,
                    _ => return Err(Error::Config("image_height and image_width must be given together".into())),
                };
                self.dataset = DatasetSpec::Csv { path: PathBuf::from(ds), label_column, geometry };
            }
        }

        for (key, (_line, value)) in map {
            self.apply_one(&key, &value)?;
        }
        Ok(())
    }

    fn apply_one(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "name" => self.name = value.to_string(),
            "algorithm" => self.algorithm = Algorithm::parse(value)?,
            "scenario" => self.scenario = parse_num(value, key)? as u8,
            "seed" => self.seed = parse_num(value, key)? as u64,
            "k" => self.k = Some(parse_num(value, key)?),
            "embedding_dim" => self.embedding_dim = Some(parse_num(value, key)?),
            "hidden" => {
                self.hidden = value
                    .split(',')
                    .map(|s| parse_num(s.trim(), key))
                    .collect::<Result<Vec<_>>>()?;
            }
            "lr" => self.lr = parse_float(value, key)?,
            "batch_size" => self.batch_size = parse_num(value, key)?,
            "pretrain_epochs" => self.pretrain_epochs = parse_num(value, key)?,
            "clustering_epochs" => self.clustering_epochs = parse_num(value, key)?,
            "lambda_ssl" => self.lambda_ssl = Some(parse_float(value, key)?),
            "lambda_cluster" => self.lambda_cluster = Some(parse_float(value, key)?),
            "grad_clip" => {
                self.grad_clip = if value == "off" { None } else { Some(parse_float(value, key)?) }
            }
            "augment" => {
                self.augment = match value {
                    "auto" => AugmentMode::Auto,
                    "on" | "true" => AugmentMode::On,
                    "off" | "false" => AugmentMode::Off,
                    other => return Err(Error::Config(format!("augment must be auto/on/off, got '{other}'"))),
                }
            }
            "augment_translate_px" => self.augment_translate_px = Some(parse_num(value, key)?),
            "augment_rotate_deg" => self.augment_rotate_deg = Some(parse_float(value, key)?),
            "augment_jitter_std" => self.augment_jitter_std = Some(parse_float(value, key)?),
            "variant" => self.variant = BrbVariant::parse(value)?,
            "alpha" => self.alpha = parse_float(value, key)?,
            "interval" => self.interval = parse_num(value, key)?,
            "reset_embedding" => self.reset_embedding = parse_bool(value, key)?,
            "reset_decoder" => self.reset_decoder = parse_bool(value, key)?,
            "reset_momentum" => self.reset_momentum = parse_bool(value, key)?,
            "reset_network_moments" => self.reset_network_moments = parse_bool(value, key)?,
            "noise_beta" => self.noise_beta = parse_float(value, key)?,
            "recluster_algorithm" => self.recluster_algorithm = ReclusterAlgorithm::parse(value)?,
            "recluster_max_iters" => self.recluster_max_iters = parse_num(value, key)?,
            "recluster_tol" => self.recluster_tol = parse_float(value, key)?,
            "subsample_size" => self.subsample_size = parse_num(value, key)?,
            "eval_every" => self.eval_every = parse_num(value, key)?,
            "eval_cd_every" => self.eval_cd_every = parse_num(value, key)?,
            "eval_subsample" => self.eval_subsample = parse_num(value, key)?,
            "out" => self.out = Some(PathBuf::from(value)),
            "export_embeddings" => self.export_embeddings = Some(PathBuf::from(value)),
            "save_params" => self.save_params = Some(PathBuf::from(value)),
            // dataset keys are consumed in apply_pairs; reaching them here
            // means no `dataset =` line was present
            "label_column" | "image_height" | "image_width" | "image_channels" | "blobs_k"
            | "blobs_per_cluster" | "blobs_dim" | "blobs_separation" | "blobs_spread" => {
                return Err(Error::Config(format!("'{key}' requires a 'dataset' key in the same config")))
            }
            other => return Err(Error::Config(format!("unknown config key '{other}'"))),
        }
        Ok(())
    }
}

fn parse_num(value: &str, key: &str) -> Result<usize> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::Config(format!("'{key}' expects an integer, got '{value}'")))
}

fn parse_float(value: &str, key: &str) -> Result<f64> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::Config(format!("'{key}' expects a number, got '{value}'")))
}

fn parse_bool(value: &str, key: &str) -> Result<bool> {
    match value.trim() {
        "true" | "on" | "1" => Ok(true),
        "false" | "off" | "0" => Ok(false),
        other => Err(Error::Config(format!("'{key}' expects true/false, got '{other}'"))),
    }
}

fn parse_pairs(text: &str) -> Result<Vec<(usize, String, String)>> {
    let mut pairs = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or(Error::Parse {
            line: idx + 1,
            message: format!("expected 'key = value', got '{line}'"),
        })?;
        pairs.push((idx + 1, key.trim().to_string(), value.trim().to_string()));
    }
    Ok(pairs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn cfg_from(text: &str) -> Result<ExperimentConfig> {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(text.as_bytes()).unwrap();
        f.flush().unwrap();
        ExperimentConfig::from_file(f.path())
    }

    #[test]
    fn defaults_match_training_table() {
        let c = ExperimentConfig::default();
        assert_eq!(c.batch_size, 256);
        assert!((c.lr - 1e-3).abs() < 1e-15);
        assert_eq!(c.pretrain_epochs, 250);
        assert_eq!(c.clustering_epochs, 400);
        assert_eq!(c.hidden, vec![1024, 512, 256]);
        assert!((c.alpha - 0.8).abs() < 1e-15);
        assert_eq!(c.interval, 20);
        assert_eq!(c.subsample_size, 10_000);
        assert!(!c.reset_embedding);
        assert!(c.reset_momentum);
        assert!((c.noise_beta - 0.3).abs() < 1e-15);
        // loss-weight defaults per algorithm
        assert_eq!(Algorithm::Dec.default_weights(), LossWeights { ssl: 0.0, cluster: 1.0 });
        assert_eq!(Algorithm::Idec.default_weights(), LossWeights { ssl: 1.0, cluster: 0.1 });
        assert_eq!(Algorithm::Dcn.default_weights(), LossWeights { ssl: 1.0, cluster: 0.025 });
        c.validate().unwrap();
    }

    #[test]
    fn parses_flat_file_and_overrides() {
        let mut c = cfg_from(
            "# comment\n\
             dataset = data/optdigits.csv\n\
             image_height = 8\n\
             image_width = 8\n\
             algorithm = idec\n\
             scenario = 2\n\
             variant = brb\n\
             alpha = 0.9\n\
             interval = 40\n\
             hidden = 64,32\n\
             seed = 7\n",
        )
        .unwrap();
        assert_eq!(c.algorithm, Algorithm::Idec);
        assert_eq!(c.hidden, vec![64, 32]);
        assert_eq!(c.interval, 40);
        match &c.dataset {
            DatasetSpec::Csv { path, geometry, .. } => {
                assert_eq!(path, &PathBuf::from("data/optdigits.csv"));
                assert_eq!(geometry.unwrap().height, 8);
            }
            other => panic!("unexpected {other:?}"),
        }
        c.apply_overrides(&[("alpha".into(), "0.5".into()), ("seed".into(), "9".into())]).unwrap();
        assert!((c.alpha - 0.5).abs() < 1e-15);
        assert_eq!(c.seed, 9);
    }

    #[test]
    fn rejects_unknown_keys_and_bad_values() {
        assert!(matches!(cfg_from("alphaa = 0.8\n"), Err(Error::Config(_))));
        assert!(matches!(cfg_from("alpha = fast\n"), Err(Error::Config(_))));
        assert!(matches!(cfg_from("no equals sign\n"), Err(Error::Parse { .. })));
        let c = cfg_from("alpha = 1.5\n").unwrap();
        assert!(c.validate().is_err());
        let c = cfg_from("scenario = 3\n").unwrap();
        assert!(c.validate().is_err());
    }

    #[test]
    fn blobs_spec_round_trip() {
        let c = cfg_from(
            "dataset = blobs\nblobs_k = 4\nblobs_per_cluster = 50\nblobs_dim = 6\nblobs_separation = 4.5\nblobs_spread = 0.9\n",
        )
        .unwrap();
        assert_eq!(
            c.dataset,
            DatasetSpec::Blobs { k: 4, per_cluster: 50, dim: 6, separation: 4.5, spread: 0.9 }
        );
    }

    #[test]
    fn scenario_two_disables_pretraining() {
        let mut c = ExperimentConfig::default();
        c.scenario = 2;
        assert_eq!(c.effective_pretrain_epochs(), 0);
        c.scenario = 1;
        assert_eq!(c.effective_pretrain_epochs(), 250);
    }

    #[test]
    fn augment_resolution() {
        let mut c = ExperimentConfig::default();
        let geom = ImageGeometry { height: 8, width: 8, channels: 1 };
        let auto = c.augment_config(Some(&geom));
        assert!(auto.enabled);
        assert_eq!(auto.max_translate_px, 1);
        assert!((auto.max_rotate_deg - 16.0).abs() < 1e-12);
        assert!(!c.augment_config(None).enabled);
        c.augment = AugmentMode::Off;
        assert!(!c.augment_config(Some(&geom)).enabled);
        c.augment = AugmentMode::On;
        c.augment_jitter_std = Some(0.05);
        let on = c.augment_config(None);
        assert!(on.enabled);
        assert!((on.jitter_std - 0.05).abs() < 1e-15);
    }
}
