//! Tensor table to per-voxel DTI feature columns.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use thalparc_core::tensor::{knutsson_edge_map, tensor_features, DiffusionTensor, KnutssonVector, Lattice};
use thalparc_core::{Error, Result};

pub const TENSOR_COLUMNS: [&str; 6] = ["dxx", "dyy", "dzz", "dxy", "dxz", "dyz"];
pub const OUTPUT_COLUMNS: [&str; 15] = [
    "fa", "md", "rd", "ad", "tr", "mode", "westin_cl", "westin_cp", "westin_cs", "knut1", "knut2", "knut3",
    "knut4", "knut5", "knut_edge",
];

struct Row {
    subject: String,
    ijk: [i64; 3],
    tensor: DiffusionTensor,
}

fn read_rows<R: Read>(input: R) -> Result<Vec<Row>> {
    let mut rdr = csv::ReaderBuilder::new().delimiter(b'\t').from_reader(input);
    let header = rdr.headers()?.clone();
    let col = |name: &str| {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    };
    let subject = col("subject")?;
    let ijk = [col("i")?, col("j")?, col("k")?];
    let tcols: Vec<usize> = TENSOR_COLUMNS.iter().map(|c| col(c)).collect::<Result<_>>()?;
    let mut rows = Vec::new();
    for (n, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let cell = |c: usize| rec.get(c).unwrap_or("");
        let parse_err = |c: usize| Error::Parse {
            row: n + 1,
            column: header[c].to_string(),
            value: cell(c).to_string(),
        };
        let mut pos = [0i64; 3];
        for a in 0..3 {
            pos[a] = cell(ijk[a]).trim().parse().map_err(|_| parse_err(ijk[a]))?;
        }
        let mut t = [0.0f64; 6];
        for (v, &c) in t.iter_mut().zip(&tcols) {
            *v = cell(c).trim().parse().map_err(|_| parse_err(c))?;
            if !v.is_finite() {
                return Err(Error::NonFiniteCell {
                    row: n + 1,
                    column: header[c].to_string(),
                    subject: cell(subject).to_string(),
                    i: pos[0],
                    j: pos[1],
                    k: pos[2],
                });
            }
        }
        rows.push(Row {
            subject: cell(subject).to_string(),
            ijk: pos,
            tensor: DiffusionTensor::new(t[0], t[1], t[2], t[3], t[4], t[5]),
        });
    }
    Ok(rows)
}

/// Reads a tensor table and writes `subject, i, j, k` plus the DTI feature
/// columns. The edge map is computed per subject on the voxels present.
pub fn tensor_table_features<R: Read, W: Write>(input: R, out: W, spacing: [f64; 3]) -> Result<()> {
    let rows = read_rows(input)?;
    let feats = rows
        .iter()
        .map(|r| tensor_features(&r.tensor))
        .collect::<Result<Vec<_>>>()?;

    let mut by_subject: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (n, r) in rows.iter().enumerate() {
        by_subject.entry(&r.subject).or_default().push(n);
    }
    let mut edge = vec![0.0; rows.len()];
    for members in by_subject.values() {
        let mut lo = [i64::MAX; 3];
        let mut hi = [i64::MIN; 3];
        for &n in members {
            for a in 0..3 {
                lo[a] = lo[a].min(rows[n].ijk[a]);
                hi[a] = hi[a].max(rows[n].ijk[a]);
            }
        }
        let dims = [0, 1, 2].map(|a| (hi[a] - lo[a] + 1) as usize);
        let len = dims[0] * dims[1] * dims[2];
        let mut values = vec![KnutssonVector::default(); len];
        let mut mask = vec![false; len];
        let index = |p: [i64; 3]| {
            let o = [0, 1, 2].map(|a| (p[a] - lo[a]) as usize);
            o[0] + dims[0] * (o[1] + dims[1] * o[2])
        };
        for &n in members {
            let idx = index(rows[n].ijk);
            values[idx] = feats[n].knutsson;
            mask[idx] = true;
        }
        let field = Lattice::with_mask(dims, values, mask)?;
        let em = knutsson_edge_map(&field, spacing)?;
        for &n in members {
            edge[n] = em.values()[index(rows[n].ijk)];
        }
    }

    let mut w = csv::WriterBuilder::new().delimiter(b'\t').from_writer(out);
    let mut header = vec!["subject", "i", "j", "k"];
    header.extend(OUTPUT_COLUMNS);
    w.write_record(&header)?;
    for (n, r) in rows.iter().enumerate() {
        let f = &feats[n];
        let s = &f.scalars;
        let mut rec = vec![r.subject.clone()];
        rec.extend(r.ijk.iter().map(|v| v.to_string()));
        let nums = [s.fa, s.md, s.rd, s.ad, s.tr, s.mode, f.westin.0, f.westin.1, f.westin.2]
            .into_iter()
            .chain(f.knutsson.0)
            .chain([edge[n]]);
        rec.extend(nums.map(|v| v.to_string()));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}
