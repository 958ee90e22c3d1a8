use std::fmt::Write as _;
use std::path::Path;

use crate::binio::{self, Reader, Writer};
use crate::error::{Error, Result};
use crate::fbg::NoiseModel;
use crate::force::{ContactForce, ForceDistribution};

use super::{Corpus, CorpusKind, LabelRange, NormStats, Sample};

pub const DATASET_MAGIC: &[u8; 4] = b"FBGD";
pub const DATASET_VERSION: u32 = 1;

pub(crate) fn write_range(w: &mut Writer, r: &LabelRange) {
    w.f64s(&r.min);
    w.f64s(&r.max);
    w.u64(r.constant.len() as u64);
    for &c in &r.constant {
        w.u8(c as u8);
    }
}

fn read_flags(r: &mut Reader) -> Result<Vec<bool>> {
    let n = r.usize()?;
    (0..n).map(|_| r.u8().map(|b| b != 0)).collect()
}

pub(crate) fn read_range(r: &mut Reader) -> Result<LabelRange> {
    Ok(LabelRange {
        min: r.f64s()?,
        max: r.f64s()?,
        constant: read_flags(r)?,
    })
}

pub(crate) fn write_stats(w: &mut Writer, s: &NormStats) {
    w.f64s(&s.mean);
    w.f64s(&s.std);
    w.f64(s.epsilon);
    w.u64(s.constant.len() as u64);
    for &c in &s.constant {
        w.u8(c as u8);
    }
    write_range(w, &s.curvature);
    write_range(w, &s.twist);
    write_range(w, &s.force);
}

pub(crate) fn read_stats(r: &mut Reader) -> Result<NormStats> {
    let stats = NormStats {
        mean: r.f64s()?,
        std: r.f64s()?,
        epsilon: r.f64()?,
        constant: read_flags(r)?,
        curvature: read_range(r)?,
        twist: read_range(r)?,
        force: read_range(r)?,
    };
    stats.validate().map_err(|e| Error::Corrupt(format!("normalization block: {e}")))?;
    Ok(stats)
}

fn encode(corpus: &Corpus) -> Result<Vec<u8>> {
    let m = corpus.layout.node_count;
    for s in &corpus.samples {
        if s.strains.len() != m || s.gt_curvatures.len() != m || s.gt_twists.len() != m || s.gt_distribution.values.len() != m {
            return Err(Error::DimensionMismatch {
                what: "sample",
                expected: m,
                actual: s.strains.len(),
            });
        }
    }
    let mut w = binio::header(DATASET_MAGIC, DATASET_VERSION);
    w.u64(m as u64);
    w.u64(corpus.samples.len() as u64);
    w.u64(corpus.scenario_count() as u64);
    w.u32(corpus.layout.fingerprint());
    w.u8(match corpus.kind {
        CorpusKind::Static => 0,
        CorpusKind::Dynamic => 1,
    });
    binio::write_layout(&mut w, &corpus.layout);
    binio::write_workspace(&mut w, &corpus.workspace);
    w.u64(corpus.seed);
    w.f64(corpus.noise.std);
    w.f64(corpus.noise.curvature_gain);
    w.f64(corpus.noise.reference_curvature);
    w.f64(corpus.stiffness);
    w.f64(corpus.force_sigma);
    match &corpus.stats {
        Some(s) => {
            w.u8(1);
            write_stats(&mut w, s);
        }
        None => w.u8(0),
    }
    for s in &corpus.samples {
        w.u64(s.scenario);
        w.u64(s.step);
        w.f64(s.bend_angle);
        w.u8(s.gt_force.active as u8);
        w.f64(s.gt_force.magnitude);
        w.f64(s.gt_force.location);
        for block in [&s.strains, &s.gt_curvatures, &s.gt_twists, &s.gt_distribution.values] {
            for &v in block.iter() {
                w.f64(v);
            }
        }
    }
    Ok(w.finish())
}

fn decode(data: &[u8]) -> Result<Corpus> {
    let mut r = Reader::open(data, DATASET_MAGIC, DATASET_VERSION)?;
    let m = r.usize()?;
    let count = r.usize()?;
    let scenarios = r.usize()?;
    let fingerprint = r.u32()?;
    let kind = match r.u8()? {
        0 => CorpusKind::Static,
        1 => CorpusKind::Dynamic,
        k => return Err(Error::Corrupt(format!("unknown corpus kind {k}"))),
    };
    let layout = binio::read_layout(&mut r)?;
    if layout.node_count != m || layout.fingerprint() != fingerprint {
        return Err(Error::Corrupt("layout block does not match the header".into()));
    }
    let workspace = binio::read_workspace(&mut r)?;
    let seed = r.u64()?;
    let noise = NoiseModel {
        std: r.f64()?,
        curvature_gain: r.f64()?,
        reference_curvature: r.f64()?,
    };
    let stiffness = r.f64()?;
    let force_sigma = r.f64()?;
    let stats = match r.u8()? {
        0 => None,
        1 => Some(read_stats(&mut r)?),
        f => return Err(Error::Corrupt(format!("bad statistics flag {f}"))),
    };
    let grid = layout.node_grid();
    // each record is at least this long; guards the allocation below
    let record = 8 * (2 + 1 + 2 + 4 * m) + 1;
    if count.checked_mul(record).map_or(true, |need| need > data.len()) {
        return Err(Error::Corrupt(format!("header claims {count} samples")));
    }
    let mut samples = Vec::with_capacity(count);
    for _ in 0..count {
        let scenario = r.u64()?;
        let step = r.u64()?;
        let bend_angle = r.f64()?;
        let active = r.u8()? != 0;
        let gt_force = ContactForce {
            magnitude: r.f64()?,
            location: r.f64()?,
            active,
        };
        let mut block = || (0..m).map(|_| r.f64()).collect::<Result<Vec<f64>>>();
        let strains = block()?;
        let gt_curvatures = block()?;
        let gt_twists = block()?;
        let values = block()?;
        samples.push(Sample {
            strains,
            gt_curvatures,
            gt_twists,
            gt_force,
            gt_distribution: ForceDistribution {
                grid: grid.clone(),
                values,
                sigma: force_sigma,
            },
            bend_angle,
            scenario,
            step,
        });
    }
    r.finish()?;
    let corpus = Corpus {
        kind,
        layout,
        workspace,
        seed,
        noise,
        stiffness,
        force_sigma,
        samples,
        stats,
    };
    if corpus.scenario_count() != scenarios {
        return Err(Error::Corrupt("scenario count does not match the header".into()));
    }
    Ok(corpus)
}

pub fn save_dataset(corpus: &Corpus, path: impl AsRef<Path>) -> Result<()> {
    let bytes = encode(corpus)?;
    std::fs::write(path, bytes)?;
    Ok(())
}

pub fn load_dataset(path: impl AsRef<Path>) -> Result<Corpus> {
    decode(&std::fs::read(path)?)
}

/// Plain-text export, one sample per row:
/// `s0..s{M-1}, k0..k{M-1}, t0..t{M-1}, F, xc, active`.
pub fn export_csv(samples: &[Sample], path: impl AsRef<Path>) -> Result<()> {
    let m = samples.first().map_or(0, |s| s.node_count());
    let mut out = String::new();
    let cols: Vec<String> = ["s", "k", "t"]
        .iter()
        .flat_map(|p| (0..m).map(move |i| format!("{p}{i}")))
        .chain(["F".into(), "xc".into(), "active".into()])
        .collect();
    out.push_str(&cols.join(","));
    out.push('\n');
    for s in samples {
        crate::error::ensure_len("sample", m, s.node_count())?;
        for v in s.strains.iter().chain(&s.gt_curvatures).chain(&s.gt_twists) {
            write!(out, "{v},").unwrap();
        }
        writeln!(
            out,
            "{},{},{}",
            s.gt_force.magnitude, s.gt_force.location, s.gt_force.active as u8
        )
        .unwrap();
    }
    std::fs::write(path, out)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{fit_norm_stats, generate_static, StaticConfig};
    use crate::fbg::SensorLayout;
    use crate::geometry::WorkspaceConfig;

    fn corpus(stats: bool) -> Corpus {
        let ws = WorkspaceConfig::default();
        let layout = SensorLayout::default();
        let cfg = StaticConfig {
            count: 25,
            ..StaticConfig::default()
        };
        let samples = generate_static(&cfg, &ws, &layout).unwrap();
        let stats = stats.then(|| fit_norm_stats(&samples, ws.force_range).unwrap());
        Corpus {
            kind: CorpusKind::Static,
            layout,
            workspace: ws,
            seed: cfg.seed,
            noise: cfg.noise,
            stiffness: cfg.stiffness,
            force_sigma: cfg.force_sigma,
            samples,
            stats,
        }
    }

    #[test]
    fn binary_round_trip_is_exact() {
        for with_stats in [false, true] {
            let c = corpus(with_stats);
            let bytes = encode(&c).unwrap();
            let back = decode(&bytes).unwrap();
            assert_eq!(back, c);
            assert_eq!(back.samples.len(), 25);
            assert_eq!(encode(&back).unwrap(), bytes);
        }
    }

    #[test]
    fn damaged_files_are_rejected() {
        let bytes = encode(&corpus(true)).unwrap();
        let truncated = &bytes[..bytes.len() - 100];
        assert!(matches!(decode(truncated), Err(Error::Checksum { .. } | Error::Corrupt(_))));
        assert!(matches!(decode(&bytes[..6]), Err(Error::Corrupt(_))));
        let mut flipped = bytes.clone();
        flipped[200] ^= 0x10;
        assert!(matches!(decode(&flipped), Err(Error::Checksum { .. })));
        let mut version = bytes.clone();
        version[4] = 9;
        assert!(matches!(decode(&version), Err(Error::Version { found: 9, .. })));
    }

    #[test]
    fn csv_layout() {
        let c = corpus(false);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.csv");
        export_csv(&c.samples, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let mut lines = text.lines();
        let header: Vec<&str> = lines.next().unwrap().split(',').collect();
        assert_eq!(header.len(), 123);
        assert_eq!(header[0], "s0");
        assert_eq!(header[39], "s39");
        assert_eq!(header[40], "k0");
        assert_eq!(header[119], "t39");
        assert_eq!(&header[120..], &["F", "xc", "active"]);
        let rows: Vec<&str> = lines.collect();
        assert_eq!(rows.len(), 25);
        let first: Vec<f64> = rows[0].split(',').map(|v| v.parse().unwrap()).collect();
        assert_eq!(first[0], c.samples[0].strains[0]);
        assert_eq!(first[120], c.samples[0].gt_force.magnitude);
    }
}
