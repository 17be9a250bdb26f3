//! Versioned little-endian blobs for fitted state. Layouts are described
//! in `docs/FORMATS.md`.

use std::io::{Cursor, Read};

use byteorder::{LittleEndian as LE, ReadBytesExt, WriteBytesExt};
use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::hyperbolic::HypProjParams;
use crate::mlp::{HeadShape, MlpHead};
use crate::projections::{LdaModel, PcaModel, RandomProj};
use crate::prototypes::{PrototypeBank, PrototypeEntry, PrototypeSet, SpaceId, SpaceKind};

pub const CHECKPOINT_VERSION: u32 = 1;

pub const MLP_MAGIC: &[u8; 4] = b"MLPH";
pub const BANK_MAGIC: &[u8; 4] = b"PBNK";
pub const RP_MAGIC: &[u8; 4] = b"RPRJ";
pub const PCA_MAGIC: &[u8; 4] = b"PCAM";
pub const LDA_MAGIC: &[u8; 4] = b"LDAM";
pub const HYP_MAGIC: &[u8; 4] = b"HYPP";

struct Writer(Vec<u8>);

impl Writer {
    fn new(magic: &[u8; 4]) -> Self {
        let mut w = Writer(magic.to_vec());
        w.0.write_u32::<LE>(CHECKPOINT_VERSION).expect("vec write");
        w
    }
    fn u8(&mut self, v: u8) {
        self.0.push(v);
    }
    fn u64(&mut self, v: u64) {
        self.0.write_u64::<LE>(v).expect("vec write");
    }
    fn f64(&mut self, v: f64) {
        self.0.write_f64::<LE>(v).expect("vec write");
    }
    fn f64s<'a>(&mut self, vs: impl IntoIterator<Item = &'a f64>) {
        vs.into_iter().for_each(|&v| self.f64(v));
    }
    /// Row-major dump of a matrix.
    fn matrix(&mut self, m: &DMatrix<f64>) {
        for i in 0..m.nrows() {
            self.f64s(m.row(i).iter());
        }
    }
}

struct Reader<'a>(Cursor<&'a [u8]>);

fn truncated(e: std::io::Error) -> Error {
    Error::Format(format!("truncated checkpoint: {e}"))
}

impl<'a> Reader<'a> {
    fn open(bytes: &'a [u8], magic: &[u8; 4]) -> Result<Self> {
        let mut r = Reader(Cursor::new(bytes));
        let mut m = [0u8; 4];
        r.0.read_exact(&mut m).map_err(truncated)?;
        if &m != magic {
            return Err(Error::Format(format!(
                "expected {} checkpoint, found magic {:?}",
                String::from_utf8_lossy(magic),
                String::from_utf8_lossy(&m)
            )));
        }
        let version = r.0.read_u32::<LE>().map_err(truncated)?;
        if version != CHECKPOINT_VERSION {
            return Err(Error::Format(format!("unsupported checkpoint version {version}")));
        }
        Ok(r)
    }
    fn u8(&mut self) -> Result<u8> {
        self.0.read_u8().map_err(truncated)
    }
    fn u64(&mut self) -> Result<u64> {
        self.0.read_u64::<LE>().map_err(truncated)
    }
    fn usize(&mut self) -> Result<usize> {
        usize::try_from(self.u64()?).map_err(|_| Error::Format("size does not fit in memory".into()))
    }
    fn f64(&mut self) -> Result<f64> {
        self.0.read_f64::<LE>().map_err(truncated)
    }
    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        self.check_remaining(n.saturating_mul(8))?;
        (0..n).map(|_| self.f64()).collect()
    }
    fn matrix(&mut self, rows: usize, cols: usize) -> Result<DMatrix<f64>> {
        let data = self.f64s(rows.saturating_mul(cols))?;
        Ok(DMatrix::from_row_slice(rows, cols, &data))
    }
    fn check_remaining(&self, n: usize) -> Result<()> {
        let left = self.0.get_ref().len() as u64 - self.0.position();
        if (n as u64) > left {
            return Err(Error::Format("truncated checkpoint".into()));
        }
        Ok(())
    }
    fn finish(self) -> Result<()> {
        if self.0.position() as usize != self.0.get_ref().len() {
            return Err(Error::Format("trailing bytes after checkpoint".into()));
        }
        Ok(())
    }
}

pub fn encode_heads(heads: &[MlpHead]) -> Vec<u8> {
    let mut w = Writer::new(MLP_MAGIC);
    w.u64(heads.len() as u64);
    for h in heads {
        let s = h.shape();
        for v in [s.input, s.hidden1, s.hidden2, s.classes] {
            w.u64(v as u64);
        }
        h.class_ids().iter().for_each(|&c| w.u64(c as u64));
        w.f64s(h.params());
    }
    w.0
}

pub fn decode_heads(bytes: &[u8]) -> Result<Vec<MlpHead>> {
    let mut r = Reader::open(bytes, MLP_MAGIC)?;
    let n = r.usize()?;
    let mut heads = Vec::new();
    for _ in 0..n {
        let shape = HeadShape { input: r.usize()?, hidden1: r.usize()?, hidden2: r.usize()?, classes: r.usize()? };
        let class_ids = (0..shape.classes).map(|_| r.usize()).collect::<Result<Vec<_>>>()?;
        let params = r.f64s(shape.num_params())?;
        heads.push(MlpHead::from_params(shape, class_ids, params)?);
    }
    r.finish()?;
    Ok(heads)
}

fn kind_code(k: SpaceKind) -> u8 {
    match k {
        SpaceKind::Identity => 0,
        SpaceKind::RandomProjection => 1,
        SpaceKind::Pca => 2,
        SpaceKind::Lda => 3,
        SpaceKind::Hyperbolic => 4,
    }
}

fn kind_from_code(c: u8) -> Result<SpaceKind> {
    Ok(match c {
        0 => SpaceKind::Identity,
        1 => SpaceKind::RandomProjection,
        2 => SpaceKind::Pca,
        3 => SpaceKind::Lda,
        4 => SpaceKind::Hyperbolic,
        other => return Err(Error::Format(format!("unknown space code {other}"))),
    })
}

pub fn encode_bank(bank: &PrototypeBank) -> Vec<u8> {
    let mut w = Writer::new(BANK_MAGIC);
    let space = bank.space();
    w.u8(kind_code(space.kind));
    w.u8(u8::from(space.normalized));
    let first = bank.entries().next();
    w.u64(first.map_or(0, |e| e.prototype.len()) as u64);
    w.u64(first.map_or(0, |e| e.raw_mean.len()) as u64);
    w.u64(bank.len() as u64);
    for e in bank.entries() {
        w.u64(e.class as u64);
        w.u64(e.count);
        w.f64s(&e.prototype);
        w.f64s(&e.raw_mean);
    }
    w.0
}

pub fn decode_bank(bytes: &[u8]) -> Result<PrototypeBank> {
    let mut r = Reader::open(bytes, BANK_MAGIC)?;
    let kind = kind_from_code(r.u8()?)?;
    let normalized = r.u8()? != 0;
    let space = SpaceId { kind, normalized };
    let (pdim, rdim, n) = (r.usize()?, r.usize()?, r.usize()?);
    let mut entries = Vec::new();
    for _ in 0..n {
        let class = r.usize()?;
        let count = r.u64()?;
        let prototype = r.f64s(pdim)?;
        let raw_mean = r.f64s(rdim)?;
        entries.push(PrototypeEntry { class, prototype, count, raw_mean });
    }
    r.finish()?;
    let mut bank = PrototypeBank::new(space);
    bank.add_task(PrototypeSet { space, entries })?;
    Ok(bank)
}

pub fn encode_random_projection(p: &RandomProj) -> Vec<u8> {
    let mut w = Writer::new(RP_MAGIC);
    w.u64(p.output_dim() as u64);
    w.u64(p.input_dim() as u64);
    w.u64(p.seed());
    w.u8(u8::from(p.relu()));
    w.matrix(p.weights());
    w.0
}

pub fn decode_random_projection(bytes: &[u8]) -> Result<RandomProj> {
    let mut r = Reader::open(bytes, RP_MAGIC)?;
    let (m, d, seed, relu) = (r.usize()?, r.usize()?, r.u64()?, r.u8()? != 0);
    let weights = r.matrix(m, d)?;
    r.finish()?;
    Ok(RandomProj::from_weights(weights, seed, relu))
}

pub fn encode_pca(m: &PcaModel) -> Vec<u8> {
    let mut w = Writer::new(PCA_MAGIC);
    w.u64(m.mean.len() as u64);
    w.u64(m.components.nrows() as u64);
    w.f64s(m.mean.iter());
    w.matrix(&m.components);
    w.f64s(&m.eigenvalues);
    w.0
}

pub fn decode_pca(bytes: &[u8]) -> Result<PcaModel> {
    let mut r = Reader::open(bytes, PCA_MAGIC)?;
    let (d, k) = (r.usize()?, r.usize()?);
    let mean = DVector::from_vec(r.f64s(d)?);
    let components = r.matrix(k, d)?;
    let eigenvalues = r.f64s(k)?;
    r.finish()?;
    Ok(PcaModel { mean, components, eigenvalues })
}

pub fn encode_lda(m: &LdaModel) -> Vec<u8> {
    let mut w = Writer::new(LDA_MAGIC);
    w.u64(m.mean.len() as u64);
    w.u64(m.directions.nrows() as u64);
    w.f64(m.ridge);
    w.f64s(m.mean.iter());
    w.matrix(&m.directions);
    w.0
}

pub fn decode_lda(bytes: &[u8]) -> Result<LdaModel> {
    let mut r = Reader::open(bytes, LDA_MAGIC)?;
    let (d, k, ridge) = (r.usize()?, r.usize()?, r.f64()?);
    let mean = DVector::from_vec(r.f64s(d)?);
    let directions = r.matrix(k, d)?;
    r.finish()?;
    Ok(LdaModel { mean, directions, ridge })
}

pub fn encode_hyperbolic(p: &HypProjParams) -> Vec<u8> {
    let mut w = Writer::new(HYP_MAGIC);
    w.u64(p.ball_dim() as u64);
    w.u64(p.input_dim() as u64);
    w.f64(p.curvature);
    w.f64(p.temperature);
    w.u8(u8::from(p.normalize_input));
    w.matrix(&p.a);
    w.0
}

pub fn decode_hyperbolic(bytes: &[u8]) -> Result<HypProjParams> {
    let mut r = Reader::open(bytes, HYP_MAGIC)?;
    let (p, d) = (r.usize()?, r.usize()?);
    let (curvature, temperature, normalize_input) = (r.f64()?, r.f64()?, r.u8()? != 0);
    let a = r.matrix(p, d)?;
    r.finish()?;
    let params = HypProjParams { a, curvature, temperature, normalize_input };
    params.validate()?;
    Ok(params)
}
