//! EMBD binary format, little-endian throughout:
//!
//! ```text
//! "EMBD" | u32 version=1 | u32 dim | u32 num_classes | u64 N
//! num_classes x (u16 byte_len, utf-8 bytes)
//! N x (u64 sample_id, u32 label, u8 split, dim x f32)
//! ```

use std::io::{Read, Write};

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};

use super::{EmbeddingDataset, EmbeddingRecord, Split};
use crate::error::{Error, Result};

pub const EMBD_MAGIC: [u8; 4] = *b"EMBD";
pub const EMBD_VERSION: u32 = 1;

fn truncated(e: std::io::Error) -> Error {
    if e.kind() == std::io::ErrorKind::UnexpectedEof {
        Error::Format("truncated EMBD file".into())
    } else {
        Error::Io(e)
    }
}

pub fn read_embd<R: Read>(mut r: R) -> Result<EmbeddingDataset> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic).map_err(truncated)?;
    if magic != EMBD_MAGIC {
        return Err(Error::Format(format!("bad magic {magic:02x?}, expected \"EMBD\"")));
    }
    let version = r.read_u32::<LittleEndian>().map_err(truncated)?;
    if version != EMBD_VERSION {
        return Err(Error::Format(format!("unsupported EMBD version {version}")));
    }
    let dim = r.read_u32::<LittleEndian>().map_err(truncated)? as usize;
    let num_classes = r.read_u32::<LittleEndian>().map_err(truncated)? as usize;
    let n = r.read_u64::<LittleEndian>().map_err(truncated)?;

    let mut class_names = Vec::with_capacity(num_classes);
    for _ in 0..num_classes {
        let len = r.read_u16::<LittleEndian>().map_err(truncated)? as usize;
        let mut buf = vec![0u8; len];
        r.read_exact(&mut buf).map_err(truncated)?;
        let name = String::from_utf8(buf).map_err(|_| Error::Format("class name is not UTF-8".into()))?;
        class_names.push(name);
    }

    // N comes from an untrusted header; cap the preallocation.
    let mut records = Vec::with_capacity(n.min(1 << 16) as usize);
    for _ in 0..n {
        let sample_id = r.read_u64::<LittleEndian>().map_err(truncated)?;
        let label = r.read_u32::<LittleEndian>().map_err(truncated)? as usize;
        if label >= num_classes {
            return Err(Error::Label { label, num_classes });
        }
        let split = Split::from_code(r.read_u8().map_err(truncated)?)?;
        let mut embedding = vec![0f32; dim];
        r.read_f32_into::<LittleEndian>(&mut embedding).map_err(truncated)?;
        records.push(EmbeddingRecord { sample_id, embedding, label, split });
    }
    let mut trailing = [0u8; 1];
    if r.read(&mut trailing)? != 0 {
        return Err(Error::Format("trailing bytes after last record".into()));
    }
    EmbeddingDataset::new(dim, class_names, records)
}

pub fn write_embd<W: Write>(ds: &EmbeddingDataset, mut w: W) -> Result<()> {
    let to_u32 = |v: usize, what: &str| {
        u32::try_from(v).map_err(|_| Error::Format(format!("{what} {v} does not fit in u32")))
    };
    w.write_all(&EMBD_MAGIC)?;
    w.write_u32::<LittleEndian>(EMBD_VERSION)?;
    w.write_u32::<LittleEndian>(to_u32(ds.dim(), "dimension")?)?;
    w.write_u32::<LittleEndian>(to_u32(ds.num_classes(), "class count")?)?;
    w.write_u64::<LittleEndian>(ds.len() as u64)?;
    for name in ds.class_names() {
        let bytes = name.as_bytes();
        let len = u16::try_from(bytes.len())
            .map_err(|_| Error::Format(format!("class name '{name}' longer than 65535 bytes")))?;
        w.write_u16::<LittleEndian>(len)?;
        w.write_all(bytes)?;
    }
    for rec in ds.records() {
        w.write_u64::<LittleEndian>(rec.sample_id)?;
        w.write_u32::<LittleEndian>(to_u32(rec.label, "label")?)?;
        w.write_u8(rec.split.code())?;
        for &x in &rec.embedding {
            w.write_f32::<LittleEndian>(x)?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn one_record() -> EmbeddingDataset {
        EmbeddingDataset::new(
            2,
            vec!["nevus".into()],
            vec![EmbeddingRecord { sample_id: 0, embedding: vec![1.0, 2.0], label: 0, split: Split::Train }],
        )
        .unwrap()
    }

    #[test]
    fn minimal_file_layout() {
        let mut buf = Vec::new();
        write_embd(&one_record(), &mut buf).unwrap();
        let mut expected = Vec::new();
        expected.extend_from_slice(b"EMBD");
        expected.extend_from_slice(&1u32.to_le_bytes());
        expected.extend_from_slice(&2u32.to_le_bytes());
        expected.extend_from_slice(&1u32.to_le_bytes());
        expected.extend_from_slice(&1u64.to_le_bytes());
        expected.extend_from_slice(&5u16.to_le_bytes());
        expected.extend_from_slice(b"nevus");
        expected.extend_from_slice(&0u64.to_le_bytes());
        expected.extend_from_slice(&0u32.to_le_bytes());
        expected.push(0);
        expected.extend_from_slice(&1.0f32.to_le_bytes());
        expected.extend_from_slice(&2.0f32.to_le_bytes());
        assert_eq!(buf, expected);

        let back = read_embd(&buf[..]).unwrap();
        assert_eq!(back.len(), 1);
        assert_eq!(back.dim(), 2);
        assert_eq!(back, one_record());
    }

    #[test]
    fn corrupt_header_is_format_error() {
        let mut buf = Vec::new();
        write_embd(&one_record(), &mut buf).unwrap();
        buf[0] = b'X';
        assert!(matches!(read_embd(&buf[..]), Err(Error::Format(_))));

        let mut buf2 = Vec::new();
        write_embd(&one_record(), &mut buf2).unwrap();
        buf2[4] = 2;
        assert!(matches!(read_embd(&buf2[..]), Err(Error::Format(_))));
    }

    #[test]
    fn label_out_of_range_and_truncation() {
        let mut buf = Vec::new();
        write_embd(&one_record(), &mut buf).unwrap();
        // label field sits right after the 8-byte sample id of the only record
        let label_at = 4 + 4 + 4 + 4 + 8 + 2 + 5 + 8;
        buf[label_at] = 3;
        assert!(matches!(read_embd(&buf[..]), Err(Error::Label { label: 3, num_classes: 1 })));

        let mut buf = Vec::new();
        write_embd(&one_record(), &mut buf).unwrap();
        buf.truncate(buf.len() - 2);
        assert!(matches!(read_embd(&buf[..]), Err(Error::Format(_))));
    }

    #[test]
    fn empty_dataset_round_trip() {
        let ds = EmbeddingDataset::new(3, vec!["a".into(), "b".into()], vec![]).unwrap();
        let mut buf = Vec::new();
        write_embd(&ds, &mut buf).unwrap();
        assert_eq!(read_embd(&buf[..]).unwrap(), ds);
    }

    fn arb_dataset() -> impl Strategy<Value = EmbeddingDataset> {
        (1usize..6, 1usize..5).prop_flat_map(|(dim, nc)| {
            let rec = (any::<u64>(), proptest::collection::vec(any::<f32>(), dim), 0..nc, 0u8..3)
                .prop_map(|(id, e, l, s)| EmbeddingRecord {
                    sample_id: id,
                    embedding: e,
                    label: l,
                    split: Split::from_code(s).unwrap(),
                });
            proptest::collection::vec(rec, 0..20).prop_map(move |records| {
                let names = (0..nc).map(|i| format!("class-{i}")).collect();
                EmbeddingDataset::new(dim, names, records).unwrap()
            })
        })
    }

    proptest! {
        #[test]
        fn embd_round_trip_is_bit_exact(ds in arb_dataset()) {
            let mut buf = Vec::new();
            write_embd(&ds, &mut buf).unwrap();
            let back = read_embd(&buf[..]).unwrap();
            prop_assert_eq!(back.len(), ds.len());
            for (a, b) in ds.records().iter().zip(back.records()) {
                prop_assert_eq!(a.sample_id, b.sample_id);
                prop_assert_eq!(a.label, b.label);
                prop_assert_eq!(a.split, b.split);
                let bits_a: Vec<u32> = a.embedding.iter().map(|x| x.to_bits()).collect();
                let bits_b: Vec<u32> = b.embedding.iter().map(|x| x.to_bits()).collect();
                prop_assert_eq!(bits_a, bits_b);
            }
            let mut again = Vec::new();
            write_embd(&back, &mut again).unwrap();
            prop_assert_eq!(buf, again);
        }
    }
}
