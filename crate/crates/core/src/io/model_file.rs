//! Binary model files.
//!
//! Layout: `"NMMH"`, `u16` version, `u32` section count, then sections of
//! `[4-byte tag][u64 payload length][payload]`. Tags: `HEAD` (label, config
//! fingerprint, state count, dim, emission kind), `INIT` (log q), `TRAN`
//! (log A), `EMIS` (emission parameters) and an optional `STDZ`
//! (standardization mean and std). Floats are stored as little-endian `f64`
//! so parameters round-trip bit for bit.

use std::path::Path;

use super::binary::{write_atomic, ByteReader, ByteWriter};
use crate::emission::{EmissionKind, EmissionModel};
use crate::error::{Error, Result};
use crate::flow::{Activation, CouplingLayer, CouplingNet, FlowGenerator, Parity};
use crate::gmm::{GmmEmission, GmmState};
use crate::hmm::HmmModel;
use crate::nmm::{NmmEmission, NmmState};
use crate::standardize::Standardizer;

pub const MODEL_MAGIC: &[u8; 4] = b"NMMH";
pub const MODEL_VERSION: u16 = 1;

fn section(out: &mut ByteWriter, tag: &[u8; 4], body: ByteWriter) {
    out.bytes(tag);
    out.u64(body.buf.len() as u64);
    out.bytes(&body.buf);
}

fn write_net(w: &mut ByteWriter, net: &CouplingNet) {
    w.len(net.input);
    w.len(net.hidden);
    w.len(net.output);
    w.u8(match net.output_activation {
        Activation::Tanh => 0,
        Activation::Identity => 1,
    });
    w.f64s(&net.w1);
    w.f64s(&net.b1);
    w.f64s(&net.w2);
    w.f64s(&net.b2);
}

fn write_flow(w: &mut ByteWriter, flow: &FlowGenerator) {
    w.len(flow.layers.len());
    for layer in &flow.layers {
        w.len(layer.split);
        w.u8(match layer.parity {
            Parity::Lower => 0,
            Parity::Upper => 1,
        });
        write_net(w, &layer.scale_net);
        write_net(w, &layer.translate_net);
    }
}

pub fn encode_model(model: &HmmModel) -> Vec<u8> {
    let s = model.num_states();
    let mut out = ByteWriter::default();
    out.bytes(MODEL_MAGIC);
    out.u16(MODEL_VERSION);
    out.u32(if model.standardizer.is_some() { 5 } else { 4 });

    let mut head = ByteWriter::default();
    head.str(&model.label);
    head.u64(model.config_fingerprint);
    head.len(s);
    head.len(model.dim());
    head.u8(match model.emission.kind() {
        EmissionKind::Gmm => 0,
        EmissionKind::Nmm => 1,
    });
    section(&mut out, b"HEAD", head);

    let mut init = ByteWriter::default();
    init.f64s(&model.log_q);
    section(&mut out, b"INIT", init);

    let mut tran = ByteWriter::default();
    tran.f64s(&model.log_a);
    section(&mut out, b"TRAN", tran);

    let mut emis = ByteWriter::default();
    match &model.emission {
        EmissionModel::Gmm(g) => {
            emis.len(g.num_components);
            emis.f64s(&[g.var_floor]);
            for st in &g.states {
                emis.f64s(&st.log_weights);
                emis.f64s(&st.means);
                emis.f64s(&st.log_vars);
            }
        }
        EmissionModel::Nmm(n) => {
            emis.len(n.num_components);
            for st in &n.states {
                emis.f64s(&st.log_weights);
                for flow in &st.flows {
                    write_flow(&mut emis, flow);
                }
            }
        }
    }
    section(&mut out, b"EMIS", emis);

    if let Some(st) = &model.standardizer {
        let mut stdz = ByteWriter::default();
        stdz.f64s(&st.mean);
        stdz.f64s(&st.std);
        section(&mut out, b"STDZ", stdz);
    }
    out.buf
}

fn read_net(r: &mut ByteReader<'_>) -> Result<CouplingNet> {
    let (input, hidden, output) = (r.len()?, r.len()?, r.len()?);
    let output_activation = match r.u8()? {
        0 => Activation::Tanh,
        1 => Activation::Identity,
        v => return Err(r.error(format!("unknown activation code {v}"))),
    };
    let w1 = r.f64s(hidden * input)?;
    let b1 = r.f64s(hidden)?;
    let w2 = r.f64s(output * hidden)?;
    let b2 = r.f64s(output)?;
    Ok(CouplingNet { input, hidden, output, output_activation, w1, b1, w2, b2 })
}

fn read_flow(r: &mut ByteReader<'_>, dim: usize) -> Result<FlowGenerator> {
    let n = r.len()?;
    let mut layers = Vec::with_capacity(n.min(1024));
    for _ in 0..n {
        let split = r.len()?;
        let parity = match r.u8()? {
            0 => Parity::Lower,
            1 => Parity::Upper,
            v => return Err(r.error(format!("unknown parity code {v}"))),
        };
        let layer = CouplingLayer { dim, split, parity, scale_net: read_net(r)?, translate_net: read_net(r)? };
        let (p, q) = (layer.pass_range().len(), layer.transform_range().len());
        for net in [&layer.scale_net, &layer.translate_net] {
            if split > dim || net.input != p || net.output != q {
                return Err(r.error("coupling layer shape inconsistent with its split"));
            }
        }
        layers.push(layer);
    }
    Ok(FlowGenerator { dim, layers })
}

pub fn decode_model(bytes: &[u8], path: &Path) -> Result<HmmModel> {
    let mut r = ByteReader::new(bytes, path);
    if r.bytes(4)? != MODEL_MAGIC {
        return Err(r.error("not a model file"));
    }
    let version = r.u16()?;
    if version != MODEL_VERSION {
        return Err(r.error(format!("unsupported model version {version}")));
    }
    let count = r.u32()?;
    let mut sections: Vec<([u8; 4], &[u8])> = Vec::new();
    for _ in 0..count {
        let tag: [u8; 4] = r.bytes(4)?.try_into().expect("4 bytes");
        let len = usize::try_from(r.u64()?).map_err(|_| r.error("section too large"))?;
        sections.push((tag, r.bytes(len)?));
    }
    if r.remaining() != 0 {
        return Err(r.error("trailing bytes after last section"));
    }
    let find = |tag: &[u8; 4]| sections.iter().find(|(t, _)| t == tag).map(|(_, b)| *b);
    let need = |tag: &[u8; 4]| find(tag).ok_or_else(|| Error::Format { path: path.to_path_buf(), message: format!("missing {} section", String::from_utf8_lossy(tag)) });

    let mut head = ByteReader::new(need(b"HEAD")?, path);
    let label = head.str()?;
    let config_fingerprint = head.u64()?;
    let (s, dim) = (head.len()?, head.len()?);
    let kind = head.u8()?;
    let log_q = ByteReader::new(need(b"INIT")?, path).f64s(s)?;
    let log_a = ByteReader::new(need(b"TRAN")?, path).f64s(s * s)?;

    let mut em = ByteReader::new(need(b"EMIS")?, path);
    let k = em.len()?;
    let emission = match kind {
        0 => {
            let var_floor = em.f64s(1)?[0];
            let states = (0..s)
                .map(|_| Ok(GmmState { log_weights: em.f64s(k)?, means: em.f64s(k * dim)?, log_vars: em.f64s(k * dim)? }))
                .collect::<Result<_>>()?;
            EmissionModel::Gmm(GmmEmission { dim, num_components: k, var_floor, states })
        }
        1 => {
            let mut states = Vec::with_capacity(s);
            for _ in 0..s {
                let log_weights = em.f64s(k)?;
                let flows = (0..k).map(|_| read_flow(&mut em, dim)).collect::<Result<_>>()?;
                states.push(NmmState { log_weights, flows });
            }
            EmissionModel::Nmm(NmmEmission { dim, num_components: k, states })
        }
        v => return Err(Error::Format { path: path.to_path_buf(), message: format!("unknown emission kind {v}") }),
    };

    let standardizer = match find(b"STDZ") {
        Some(b) => {
            let mut st = ByteReader::new(b, path);
            Some(Standardizer { mean: st.f64s(dim)?, std: st.f64s(dim)? })
        }
        None => None,
    };
    let mut model = HmmModel::new(label, log_q, log_a, emission).map_err(|e| Error::Format { path: path.to_path_buf(), message: e.to_string() })?;
    model.standardizer = standardizer;
    model.config_fingerprint = config_fingerprint;
    Ok(model)
}

pub fn write_model(path: impl AsRef<Path>, model: &HmmModel) -> Result<()> {
    write_atomic(path.as_ref(), &encode_model(model))
}

pub fn read_model(path: impl AsRef<Path>) -> Result<HmmModel> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_model(&bytes, path)
}
