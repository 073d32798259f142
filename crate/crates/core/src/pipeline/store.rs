//! Checkpoint files of a training run.

use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::counterfactual::{GanHyper, StarGan};
use crate::dsp::VoicingConfig;
use crate::error::{Result, RexError};
use crate::relations::{CueScale, HeadsModel, RelationTable, RexNet};
use crate::tensornet::{Checkpoint, CnnArch, CnnModel, FeatureNorm};

pub const REXNET_FILE: &str = "rexnet.rxn";
pub const STARGAN_FILE: &str = "stargan.rxn";
pub const SPEAKER_FILE: &str = "speaker.rxn";
pub const TABLE_FILE: &str = "relation_table.json";
pub const CONFIG_FILE: &str = "config.json";
pub const TRACE_FILE: &str = "metrics_trace.json";

#[derive(Serialize, Deserialize)]
struct RexNetMeta {
    arch: CnnArch,
    norm: FeatureNorm,
    scale: CueScale,
    table: RelationTable,
    tau: f64,
    voicing: VoicingConfig,
}

fn meta<T: for<'de> Deserialize<'de>>(ck: &Checkpoint, kind: &str) -> Result<T> {
    if ck.kind != kind {
        return Err(RexError::Checkpoint(format!("expected a {kind} checkpoint, found {}", ck.kind)));
    }
    Ok(serde_json::from_value(ck.meta.clone())?)
}

/// Writes the trained chain with the input statistics it expects.
pub fn save_rexnet(path: &Path, rexnet: &RexNet, norm: &FeatureNorm) -> Result<()> {
    let m = RexNetMeta {
        arch: rexnet.base.arch,
        norm: norm.clone(),
        scale: rexnet.scale.clone(),
        table: rexnet.table.clone(),
        tau: rexnet.tau,
        voicing: rexnet.voicing_config,
    };
    let mut ck = Checkpoint::new("rexnet", serde_json::to_value(m)?);
    ck.push_model("base", &rexnet.base);
    ck.push_model("heads", &rexnet.heads);
    ck.write(path)
}

pub fn load_rexnet(path: &Path) -> Result<(RexNet, FeatureNorm)> {
    let ck = Checkpoint::read(path)?;
    let m: RexNetMeta = meta(&ck, "rexnet")?;
    let mut base = CnnModel::zeros(m.arch);
    ck.load_model("base", &mut base)?;
    let mut heads = HeadsModel::new(0);
    ck.load_model("heads", &mut heads)?;
    let rexnet = RexNet {
        base,
        heads,
        table: m.table,
        scale: m.scale,
        tau: m.tau,
        voicing_config: m.voicing,
    };
    Ok((rexnet, m.norm))
}

pub fn save_stargan(path: &Path, gan: &StarGan, hyper: &GanHyper) -> Result<()> {
    let mut ck = Checkpoint::new("stargan", json!({ "norm": gan.norm, "hyper": hyper }));
    ck.push_model("g", &gan.g);
    ck.push_model("d", &gan.d);
    ck.push_model("m", &gan.m);
    ck.write(path)
}

pub fn load_stargan(path: &Path) -> Result<StarGan> {
    #[derive(Deserialize)]
    struct Meta {
        norm: FeatureNorm,
        hyper: GanHyper,
    }
    let ck = Checkpoint::read(path)?;
    let m: Meta = meta(&ck, "stargan")?;
    let mut gan = StarGan::new(m.norm, &m.hyper);
    ck.load_model("g", &mut gan.g)?;
    ck.load_model("d", &mut gan.d)?;
    ck.load_model("m", &mut gan.m)?;
    Ok(gan)
}

/// Speaker-identification CNN; class `k` is the `k`-th actor in `actors`.
pub fn save_speaker(path: &Path, model: &CnnModel, actors: &[u8]) -> Result<()> {
    let mut ck = Checkpoint::new("speaker", json!({ "arch": model.arch, "actors": actors }));
    ck.push_model("model", model);
    ck.write(path)
}

pub fn load_speaker(path: &Path) -> Result<(CnnModel, Vec<u8>)> {
    #[derive(Deserialize)]
    struct Meta {
        arch: CnnArch,
        actors: Vec<u8>,
    }
    let ck = Checkpoint::read(path)?;
    let m: Meta = meta(&ck, "speaker")?;
    let mut model = CnnModel::zeros(m.arch);
    ck.load_model("model", &mut model)?;
    Ok((model, m.actors))
}
