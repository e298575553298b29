//! Checkpoint container: magic, u32 version, u32 header length, `key=value`
//! architecture header, then the little-endian f64 parameter block and,
//! when present, Adam's first and second moment vectors.

use std::fs;
use std::path::Path;

use super::{Adam, EmbeddingMode, NetArch, TimeEmbedding, VelocityNetwork};
use crate::error::{Error, Result};
use crate::kv::KvText;
use crate::liegroup::{GroupKind, GroupSpec};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"LIEFLOWC";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub net: VelocityNetwork,
    /// Number of completed training epochs.
    pub epoch: usize,
    pub optimizer: Option<Adam>,
}

impl Checkpoint {
    /// Fails with an incompatibility error unless the network outputs `spec`
    /// coefficients and reads clouds of the given shape.
    pub fn ensure_compatible(&self, spec: GroupSpec, point_dim: usize, n_points: usize) -> Result<()> {
        let a = self.net.arch();
        if a.group != spec.kind {
            return Err(Error::Incompatible(format!(
                "checkpoint was trained for {}, run uses {}",
                a.group, spec.kind
            )));
        }
        if a.point_dim != point_dim || a.n_points != n_points {
            return Err(Error::Incompatible(format!(
                "checkpoint reads {} points in {}D, data has {} in {}D",
                a.n_points, a.point_dim, n_points, point_dim
            )));
        }
        Ok(())
    }
}

fn push_f64s(buf: &mut Vec<u8>, xs: &[f64]) {
    for x in xs {
        buf.extend_from_slice(&x.to_le_bytes());
    }
}

pub fn save_checkpoint(ck: &Checkpoint, path: &Path) -> Result<()> {
    let a = ck.net.arch();
    let mut kv = KvText::new();
    kv.push("group", a.group)
        .push("point_dim", a.point_dim)
        .push("n_points", a.n_points)
        .push(
            "hidden",
            a.hidden.iter().map(usize::to_string).collect::<Vec<_>>().join(","),
        )
        .push("embedding_mode", a.embedding.mode)
        .push("embedding_dim", a.embedding.dim)
        .push_f64("max_frequency", a.embedding.max_frequency)
        .push("output_dim", a.output_dim())
        .push("param_count", ck.net.params().len())
        .push("epoch", ck.epoch)
        .push("optimizer", ck.optimizer.is_some());
    if let Some(opt) = &ck.optimizer {
        kv.push_f64("adam_lr", opt.lr)
            .push_f64("adam_beta1", opt.beta1)
            .push_f64("adam_beta2", opt.beta2)
            .push_f64("adam_eps", opt.eps)
            .push("adam_step", opt.step);
    }
    let text = kv.render();
    let mut buf = Vec::new();
    buf.extend_from_slice(CHECKPOINT_MAGIC);
    buf.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    buf.extend_from_slice(&(text.len() as u32).to_le_bytes());
    buf.extend_from_slice(text.as_bytes());
    push_f64s(&mut buf, ck.net.params());
    if let Some(opt) = &ck.optimizer {
        push_f64s(&mut buf, &opt.m);
        push_f64s(&mut buf, &opt.v);
    }
    // write-then-rename so an interrupted save never clobbers a good file
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, &buf).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    parse(&bytes)
}

fn parse(bytes: &[u8]) -> Result<Checkpoint> {
    let what = "checkpoint";
    if bytes.len() < 16 || &bytes[..8] != CHECKPOINT_MAGIC {
        return Err(Error::parse(what, "not a checkpoint file (bad magic)"));
    }
    let version = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
    if version != CHECKPOINT_VERSION {
        return Err(Error::Incompatible(format!(
            "checkpoint format version {version}, expected {CHECKPOINT_VERSION}"
        )));
    }
    let hlen = u32::from_le_bytes(bytes[12..16].try_into().unwrap()) as usize;
    let body = bytes
        .get(16..16 + hlen)
        .ok_or_else(|| Error::parse(what, "header truncated"))?;
    let text = std::str::from_utf8(body).map_err(|_| Error::parse(what, "header is not UTF-8"))?;
    let kv = KvText::parse(what, text)?;

    let group: GroupKind = kv.parse_value(what, "group")?;
    let hidden = kv
        .require(what, "hidden")?
        .split(',')
        .map(|w| w.trim().parse::<usize>())
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|e| Error::parse(what, format!("bad hidden widths: {e}")))?;
    let mode: EmbeddingMode = kv.parse_value(what, "embedding_mode")?;
    let arch = NetArch {
        group,
        point_dim: kv.parse_value(what, "point_dim")?,
        n_points: kv.parse_value(what, "n_points")?,
        hidden,
        embedding: TimeEmbedding {
            mode,
            dim: kv.parse_value(what, "embedding_dim")?,
            max_frequency: kv.parse_value(what, "max_frequency")?,
        },
    };
    let output_dim: usize = kv.parse_value(what, "output_dim")?;
    if output_dim != arch.output_dim() {
        return Err(Error::Incompatible(format!(
            "head has {output_dim} outputs but {group} has algebra dimension {}",
            arch.output_dim()
        )));
    }
    let n: usize = kv.parse_value(what, "param_count")?;
    if n != super::param_count(&arch.layer_sizes()) {
        return Err(Error::Incompatible(format!(
            "{n} parameters do not fit the recorded layer sizes {:?}",
            arch.layer_sizes()
        )));
    }
    let has_opt: bool = kv.parse_value(what, "optimizer")?;
    let expected = 16 + hlen + 8 * n * if has_opt { 3 } else { 1 };
    if bytes.len() != expected {
        return Err(Error::parse(
            what,
            format!("expected {expected} bytes, file has {}", bytes.len()),
        ));
    }
    let floats: Vec<f64> = bytes[16 + hlen..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    let net = VelocityNetwork::from_parts(arch, floats[..n].to_vec())
        .map_err(|e| Error::Incompatible(e.to_string()))?;
    let optimizer = if has_opt {
        Some(Adam {
            lr: kv.parse_value(what, "adam_lr")?,
            beta1: kv.parse_value(what, "adam_beta1")?,
            beta2: kv.parse_value(what, "adam_beta2")?,
            eps: kv.parse_value(what, "adam_eps")?,
            step: kv.parse_value(what, "adam_step")?,
            m: floats[n..2 * n].to_vec(),
            v: floats[2 * n..].to_vec(),
        })
    } else {
        None
    };
    Ok(Checkpoint {
        net,
        epoch: kv.parse_value(what, "epoch")?,
        optimizer,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datasets::PointCloud;
    use crate::net::default_hidden;
    use crate::rng::substream;
    use rand::Rng as _;

    fn net(group: GroupKind) -> VelocityNetwork {
        let spec = GroupSpec::new(group);
        let arch = NetArch {
            group,
            point_dim: spec.matrix_dim,
            n_points: 5,
            hidden: default_hidden(spec),
            embedding: TimeEmbedding::CONCAT,
        };
        let mut rng = substream(1, 0);
        let mut net = VelocityNetwork::new(arch, &mut rng).unwrap();
        for p in net.params_mut() {
            *p += rng.gen_range(-0.05..0.05);
        }
        net
    }

    #[test]
    fn roundtrip_preserves_outputs() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("net.ckpt");
        let mut opt = Adam::new(0, 1e-3);
        let n = net(GroupKind::SO2);
        opt.m = vec![0.25; n.params().len()];
        opt.v = vec![0.5; n.params().len()];
        opt.step = 12;
        let ck = Checkpoint {
            net: n,
            epoch: 3,
            optimizer: Some(opt),
        };
        save_checkpoint(&ck, &path).unwrap();
        let back = load_checkpoint(&path).unwrap();
        assert_eq!(back, ck);
        let mut rng = substream(2, 0);
        for _ in 0..10 {
            let cloud = PointCloud::new(2, (0..10).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap();
            let t = rng.gen_range(0.0..1.0);
            assert_eq!(ck.net.forward(&cloud, t).unwrap(), back.net.forward(&cloud, t).unwrap());
        }
    }

    #[test]
    fn complex_layout_roundtrips() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.ckpt");
        let ck = Checkpoint {
            net: net(GroupKind::GL2C),
            epoch: 0,
            optimizer: None,
        };
        save_checkpoint(&ck, &path).unwrap();
        let back = load_checkpoint(&path).unwrap();
        assert_eq!(back.net.arch().hidden, vec![256; 3]);
        assert_eq!(back.net.arch().input_dim(), 2 * 2 * 5 + 1);
        assert_eq!(back, ck);
    }

    #[test]
    fn wrong_algebra_dim_is_incompatible() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("n.ckpt");
        let ck = Checkpoint {
            net: net(GroupKind::SO2),
            epoch: 0,
            optimizer: None,
        };
        save_checkpoint(&ck, &path).unwrap();
        let bytes = fs::read(&path).unwrap();
        let mut patched = bytes.clone();
        let pos = bytes.windows(12).position(|w| w == b"output_dim=1").unwrap();
        patched[pos + 11] = b'3';
        fs::write(&path, &patched).unwrap();
        assert!(matches!(load_checkpoint(&path), Err(Error::Incompatible(_))));

        assert!(matches!(
            ck.ensure_compatible(GroupSpec::SO3, 3, 5),
            Err(Error::Incompatible(_))
        ));
        assert!(ck.ensure_compatible(GroupSpec::SO2, 2, 5).is_ok());
    }

    #[test]
    fn truncated_checkpoint_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("n.ckpt");
        let ck = Checkpoint {
            net: net(GroupKind::SO2),
            epoch: 0,
            optimizer: None,
        };
        save_checkpoint(&ck, &path).unwrap();
        let bytes = fs::read(&path).unwrap();
        fs::write(&path, &bytes[..bytes.len() - 8]).unwrap();
        assert!(matches!(load_checkpoint(&path), Err(Error::Parse { .. })));
    }
}
