//! `ODXM` model container: named binary sections followed by a SHA-256
//! checksum of everything before it.
//!
//! Layout (little endian): magic `ODXM`, u16 version, u32 section count, then
//! per section a u16-length UTF-8 name and a u64-length payload.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use ndarray::{Array1, Array2};
use sha2::{Digest, Sha256};

use crate::dataio::LabelMap;
use crate::dec::ClusteringHead;
use crate::error::{OdxuError, Result};
use crate::gbt::{GbtParams, NodeKind, Tree, TreeEnsemble, TreeNode};
use crate::nn::{Activation, Autoencoder, Dense, DenseNet};
use crate::uq::{MetamodelBundle, Recipe};

pub const MAGIC: &[u8; 4] = b"ODXM";
pub const VERSION: u16 = 1;

pub const SECTION_AE: &str = "ae";
pub const SECTION_CLUSTER: &str = "cluster";
pub const SECTION_CLF: &str = "clf";
pub const SECTION_FCNN: &str = "fcnn";
const META_PREFIX: &str = "meta:";

/// Base classifier with the class names its output indices refer to.
#[derive(Debug, Clone, PartialEq)]
pub struct Classifier {
    pub model: TreeEnsemble,
    pub labels: LabelMap,
}

/// Every model a pipeline run can produce. Absent parts are simply not
/// written.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Bundle {
    pub ae: Option<Autoencoder>,
    pub cluster: Option<ClusteringHead>,
    pub clf: Option<Classifier>,
    pub fcnn: Option<DenseNet>,
    pub metas: BTreeMap<Recipe, MetamodelBundle>,
}

fn missing(name: &str) -> OdxuError {
    OdxuError::MissingSection(name.to_string())
}

impl Bundle {
    pub fn require_ae(&self) -> Result<&Autoencoder> {
        self.ae.as_ref().ok_or_else(|| missing(SECTION_AE))
    }

    pub fn require_cluster(&self) -> Result<&ClusteringHead> {
        self.cluster.as_ref().ok_or_else(|| missing(SECTION_CLUSTER))
    }

    pub fn require_clf(&self) -> Result<&Classifier> {
        self.clf.as_ref().ok_or_else(|| missing(SECTION_CLF))
    }

    pub fn require_meta(&self, recipe: Recipe) -> Result<&MetamodelBundle> {
        self.metas
            .get(&recipe)
            .ok_or_else(|| missing(&format!("{META_PREFIX}{recipe}")))
    }

    pub fn section_names(&self) -> Vec<String> {
        encode_sections(self).into_iter().map(|(n, _)| n).collect()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        write_container(&encode_sections(self))
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        decode_sections(read_container(bytes)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_bytes(&fs::read(path)?)
    }
}

/// Hex SHA-256 of a file's bytes, as recorded in manifests.
pub fn file_sha256(path: impl AsRef<Path>) -> Result<String> {
    Ok(hex::encode(Sha256::digest(fs::read(path)?)))
}

fn corrupt(msg: impl Into<String>) -> OdxuError {
    OdxuError::Checkpoint(msg.into())
}

#[derive(Default)]
struct Enc(Vec<u8>);

impl Enc {
    fn u8(&mut self, v: u8) {
        self.0.push(v);
    }
    fn u32(&mut self, v: usize) {
        self.0.extend_from_slice(&(v as u32).to_le_bytes());
    }
    fn u64(&mut self, v: u64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn f64(&mut self, v: f64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn f64s<'a>(&mut self, vs: impl IntoIterator<Item = &'a f64>) {
        for v in vs {
            self.f64(*v);
        }
    }
    fn str(&mut self, s: &str) {
        self.u32(s.len());
        self.0.extend_from_slice(s.as_bytes());
    }
}

struct Dec<'a> {
    buf: &'a [u8],
    what: &'a str,
}

impl<'a> Dec<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.buf.len() < n {
            return Err(corrupt(format!("section `{}` truncated", self.what)));
        }
        let (head, rest) = self.buf.split_at(n);
        self.buf = rest;
        Ok(head)
    }
    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }
    fn u32(&mut self) -> Result<usize> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")) as usize)
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        if self.buf.len() / 8 < n {
            return Err(corrupt(format!("section `{}` truncated", self.what)));
        }
        (0..n).map(|_| self.f64()).collect()
    }
    fn str(&mut self) -> Result<String> {
        let n = self.u32()?;
        String::from_utf8(self.take(n)?.to_vec()).map_err(|_| corrupt(format!("bad UTF-8 in section `{}`", self.what)))
    }
    fn finish(&self) -> Result<()> {
        if self.buf.is_empty() {
            Ok(())
        } else {
            Err(corrupt(format!("trailing bytes in section `{}`", self.what)))
        }
    }
}

fn write_container(sections: &[(String, Vec<u8>)]) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(sections.len() as u32).to_le_bytes());
    for (name, payload) in sections {
        out.extend_from_slice(&(name.len() as u16).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        out.extend_from_slice(&(payload.len() as u64).to_le_bytes());
        out.extend_from_slice(payload);
    }
    let digest = Sha256::digest(&out);
    out.extend_from_slice(&digest);
    out
}

fn read_container(bytes: &[u8]) -> Result<Vec<(String, Vec<u8>)>> {
    if bytes.len() < 4 + 2 + 4 + 32 || &bytes[..4] != MAGIC {
        return Err(corrupt("not an ODXM container"));
    }
    let (body, digest) = bytes.split_at(bytes.len() - 32);
    if Sha256::digest(body).as_slice() != digest {
        return Err(corrupt("checksum mismatch"));
    }
    let mut d = Dec { buf: &body[4..], what: "header" };
    let version = u16::from_le_bytes(d.take(2)?.try_into().expect("2 bytes"));
    if version != VERSION {
        return Err(corrupt(format!("unsupported version {version}")));
    }
    let count = d.u32()?;
    let mut sections = Vec::with_capacity(count.min(64));
    for _ in 0..count {
        let n = u16::from_le_bytes(d.take(2)?.try_into().expect("2 bytes")) as usize;
        let name = String::from_utf8(d.take(n)?.to_vec()).map_err(|_| corrupt("bad section name"))?;
        let len = usize::try_from(d.u64()?).map_err(|_| corrupt("section too large"))?;
        sections.push((name, d.take(len)?.to_vec()));
    }
    d.finish()?;
    Ok(sections)
}

fn put_net(e: &mut Enc, net: &DenseNet) {
    e.u32(net.layers().len());
    for l in net.layers() {
        e.u32(l.fan_in());
        e.u32(l.fan_out());
        e.u8(l.activation.tag());
        e.f64s(l.weights.iter());
        e.f64s(l.bias.iter());
    }
}

fn get_net(d: &mut Dec) -> Result<DenseNet> {
    let n = d.u32()?;
    let mut layers = Vec::with_capacity(n.min(64));
    for _ in 0..n {
        let (fan_in, fan_out) = (d.u32()?, d.u32()?);
        let activation = Activation::from_tag(d.u8()?).ok_or_else(|| corrupt("unknown activation tag"))?;
        let w = d.f64s(fan_in.checked_mul(fan_out).ok_or_else(|| corrupt("layer too large"))?)?;
        let b = d.f64s(fan_out)?;
        layers.push(Dense {
            weights: Array2::from_shape_vec((fan_in, fan_out), w).map_err(|e| corrupt(e.to_string()))?,
            bias: Array1::from_vec(b),
            activation,
        });
    }
    DenseNet::from_layers(layers).map_err(|e| corrupt(e.to_string()))
}

fn put_params(e: &mut Enc, p: &GbtParams) {
    e.u64(p.n_rounds as u64);
    e.u64(p.max_depth as u64);
    e.f64(p.learning_rate);
    e.f64(p.reg_lambda);
    e.f64(p.gamma);
    e.f64(p.min_child_weight);
    e.f64(p.base_score);
}

fn get_params(d: &mut Dec) -> Result<GbtParams> {
    Ok(GbtParams {
        n_rounds: d.u64()? as usize,
        max_depth: d.u64()? as usize,
        learning_rate: d.f64()?,
        reg_lambda: d.f64()?,
        gamma: d.f64()?,
        min_child_weight: d.f64()?,
        base_score: d.f64()?,
    })
}

fn put_ensemble(e: &mut Enc, m: &TreeEnsemble) {
    e.u32(m.n_classes());
    e.u32(m.n_features());
    put_params(e, m.params());
    e.u32(m.trees().len());
    for t in m.trees() {
        e.u32(t.class);
        e.u32(t.nodes.len());
        for node in &t.nodes {
            match node.kind {
                NodeKind::Leaf { weight } => {
                    e.u8(0);
                    e.f64(weight);
                }
                NodeKind::Split {
                    feature,
                    threshold,
                    left,
                    right,
                    gain,
                } => {
                    e.u8(1);
                    e.u32(feature);
                    e.f64(threshold);
                    e.f64(gain);
                    e.u32(left);
                    e.u32(right);
                }
            }
            e.f64(node.cover);
        }
    }
    e.u32(m.gain_vector().len());
    e.f64s(m.gain_vector());
    e.u32(m.train_loss().len());
    e.f64s(m.train_loss());
}

fn get_ensemble(d: &mut Dec) -> Result<TreeEnsemble> {
    let (n_classes, n_features) = (d.u32()?, d.u32()?);
    let params = get_params(d)?;
    let n_trees = d.u32()?;
    let mut trees = Vec::with_capacity(n_trees.min(1 << 16));
    for _ in 0..n_trees {
        let class = d.u32()?;
        let n_nodes = d.u32()?;
        let mut nodes = Vec::with_capacity(n_nodes.min(1 << 16));
        for _ in 0..n_nodes {
            let kind = match d.u8()? {
                0 => NodeKind::Leaf { weight: d.f64()? },
                1 => NodeKind::Split {
                    feature: d.u32()?,
                    threshold: d.f64()?,
                    gain: d.f64()?,
                    left: d.u32()?,
                    right: d.u32()?,
                },
                t => return Err(corrupt(format!("unknown node tag {t}"))),
            };
            nodes.push(TreeNode { kind, cover: d.f64()? });
        }
        trees.push(Tree { class, nodes });
    }
    let n_gain = d.u32()?;
    let gain = d.f64s(n_gain)?;
    let n_loss = d.u32()?;
    let loss = d.f64s(n_loss)?;
    let model = TreeEnsemble::from_parts(trees, n_classes, n_features, params, loss).map_err(|e| corrupt(e.to_string()))?;
    if model.gain_vector() != gain.as_slice() {
        return Err(corrupt("stored feature gain disagrees with the trees"));
    }
    Ok(model)
}

/// Canonical byte encoding of an ensemble; also the input to fingerprints.
pub fn encode_ensemble(m: &TreeEnsemble) -> Vec<u8> {
    let mut e = Enc::default();
    put_ensemble(&mut e, m);
    e.0
}

fn encode_sections(b: &Bundle) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    if let Some(ae) = &b.ae {
        let mut e = Enc::default();
        put_net(&mut e, &ae.encoder);
        put_net(&mut e, &ae.decoder);
        out.push((SECTION_AE.to_string(), e.0));
    }
    if let Some(h) = &b.cluster {
        let mut e = Enc::default();
        e.u32(h.k());
        e.u32(h.dim());
        e.f64(h.alpha());
        e.f64s(h.centroids().iter());
        out.push((SECTION_CLUSTER.to_string(), e.0));
    }
    if let Some(c) = &b.clf {
        let mut e = Enc::default();
        e.u32(c.labels.len());
        for name in c.labels.names() {
            e.str(name);
        }
        put_ensemble(&mut e, &c.model);
        out.push((SECTION_CLF.to_string(), e.0));
    }
    if let Some(net) = &b.fcnn {
        let mut e = Enc::default();
        put_net(&mut e, net);
        out.push((SECTION_FCNN.to_string(), e.0));
    }
    for (recipe, m) in &b.metas {
        let mut e = Enc::default();
        e.str(recipe.tag());
        e.str(&m.base_ref);
        e.f64(m.threshold);
        put_ensemble(&mut e, &m.model);
        out.push((format!("{META_PREFIX}{recipe}"), e.0));
    }
    out
}

fn decode_sections(sections: Vec<(String, Vec<u8>)>) -> Result<Bundle> {
    let mut b = Bundle::default();
    for (name, payload) in &sections {
        let mut d = Dec { buf: payload, what: name };
        match name.as_str() {
            SECTION_AE => {
                let encoder = get_net(&mut d)?;
                let decoder = get_net(&mut d)?;
                b.ae = Some(Autoencoder::from_parts(encoder, decoder).map_err(|e| corrupt(e.to_string()))?);
            }
            SECTION_CLUSTER => {
                let (k, dim) = (d.u32()?, d.u32()?);
                let alpha = d.f64()?;
                let c = d.f64s(k.checked_mul(dim).ok_or_else(|| corrupt("centroids too large"))?)?;
                let centroids = Array2::from_shape_vec((k, dim), c).map_err(|e| corrupt(e.to_string()))?;
                b.cluster = Some(ClusteringHead::new(centroids, alpha).map_err(|e| corrupt(e.to_string()))?);
            }
            SECTION_CLF => {
                let n = d.u32()?;
                let names = (0..n).map(|_| d.str()).collect::<Result<Vec<_>>>()?;
                let labels = LabelMap::from_names(names);
                let model = get_ensemble(&mut d)?;
                if labels.len() != model.n_classes() {
                    return Err(corrupt("classifier label count disagrees with the ensemble"));
                }
                b.clf = Some(Classifier { model, labels });
            }
            SECTION_FCNN => b.fcnn = Some(get_net(&mut d)?),
            other => {
                let Some(tag) = other.strip_prefix(META_PREFIX) else {
                    return Err(corrupt(format!("unknown section `{other}`")));
                };
                let recipe: Recipe = tag.parse().map_err(|_| corrupt(format!("unknown metamodel recipe `{tag}`")))?;
                let stored: Recipe = d.str()?.parse().map_err(|_| corrupt("bad recipe tag"))?;
                if stored != recipe {
                    return Err(OdxuError::MetamodelMismatch(format!(
                        "section `{other}` holds a {stored} metamodel"
                    )));
                }
                let base_ref = d.str()?;
                let threshold = d.f64()?;
                let model = get_ensemble(&mut d)?;
                if model.n_classes() != 2 {
                    return Err(corrupt("metamodel must be binary"));
                }
                b.metas.insert(
                    recipe,
                    MetamodelBundle {
                        recipe,
                        model,
                        base_ref,
                        threshold,
                    },
                );
            }
        }
        d.finish()?;
    }
    Ok(b)
}

/// Removes a named section from a container file image, re-signing it.
pub fn drop_section(bytes: &[u8], name: &str) -> Result<Vec<u8>> {
    let sections: Vec<_> = read_container(bytes)?.into_iter().filter(|(n, _)| n != name).collect();
    Ok(write_container(&sections))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn small_bundle() -> Bundle {
        let ae = Autoencoder::new(
            &crate::nn::AeArch {
                input: 6,
                hidden: vec![4],
                latent: 2,
            },
            3,
        )
        .unwrap();
        let head = ClusteringHead::new(array![[0.0, 1.0], [1.0, 0.0]], 1.0).unwrap();
        let x = array![[0.0, 1.0], [1.0, 0.0], [0.2, 0.9], [0.8, 0.1]];
        let y = [0, 1, 0, 1];
        let model = crate::gbt::fit(
            x.view(),
            &y,
            2,
            &GbtParams {
                n_rounds: 3,
                min_child_weight: 0.0,
                ..GbtParams::default()
            },
        )
        .unwrap();
        Bundle {
            ae: Some(ae),
            cluster: Some(head),
            clf: Some(Classifier {
                model,
                labels: LabelMap::from_names(vec!["Benign".into(), "Attack-01".into()]),
            }),
            ..Bundle::default()
        }
    }

    #[test]
    fn round_trip() {
        let b = small_bundle();
        let bytes = b.to_bytes();
        assert_eq!(&bytes[..4], MAGIC);
        assert_eq!(Bundle::from_bytes(&bytes).unwrap(), b);
        assert_eq!(Bundle::from_bytes(&bytes).unwrap().to_bytes(), bytes);
    }

    #[test]
    fn corruption_detected() {
        let mut bytes = small_bundle().to_bytes();
        bytes[20] ^= 1;
        assert!(matches!(Bundle::from_bytes(&bytes), Err(OdxuError::Checkpoint(_))));
        assert!(Bundle::from_bytes(b"nope").is_err());
    }

    #[test]
    fn dropped_section_is_reported() {
        let bytes = drop_section(&small_bundle().to_bytes(), SECTION_CLF).unwrap();
        let b = Bundle::from_bytes(&bytes).unwrap();
        assert!(b.ae.is_some());
        match b.require_clf() {
            Err(OdxuError::MissingSection(s)) => assert_eq!(s, "clf"),
            other => panic!("unexpected {other:?}"),
        }
    }
}
